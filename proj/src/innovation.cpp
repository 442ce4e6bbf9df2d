#include "nevo/innovation.hpp"

#include <algorithm>

#include "json.hpp"

#include "nevo/errors.hpp"

namespace nevo {

InnovationRegistry::InnovationRegistry(const Genome& seed) {
    for (const auto& n : seed.nodes) {
        next_node_id_ = std::max(next_node_id_, n.innovation_id + 1);
    }
    for (const auto& e : seed.edges) {
        edge_innovations_[{e.in_node, e.out_node}] = e.innovation_id;
        next_edge_id_ = std::max(next_edge_id_, e.innovation_id + 1);
    }
}

InnovationRegistry::InnovationRegistry(const InnovationRegistry& other) {
    std::lock_guard<std::mutex> lock(other.mutex_);
    edge_innovations_ = other.edge_innovations_;
    split_node_innovations_ = other.split_node_innovations_;
    next_node_id_ = other.next_node_id_;
    next_edge_id_ = other.next_edge_id_;
}

InnovationRegistry& InnovationRegistry::operator=(
    const InnovationRegistry& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    edge_innovations_ = other.edge_innovations_;
    split_node_innovations_ = other.split_node_innovations_;
    next_node_id_ = other.next_node_id_;
    next_edge_id_ = other.next_edge_id_;
    return *this;
}

int InnovationRegistry::edge_id(int in_node, int out_node) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(in_node, out_node);
    auto it = edge_innovations_.find(key);
    if (it != edge_innovations_.end()) return it->second;
    int id = next_edge_id_++;
    edge_innovations_.emplace(key, id);
    return id;
}

int InnovationRegistry::node_id_for_split(int split_edge_id, const Genome& g) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& known = split_node_innovations_[split_edge_id];
    for (int id : known) {
        if (g.find_node(id) == nullptr) return id;
    }
    int id = next_node_id_++;
    known.push_back(id);
    return id;
}

int InnovationRegistry::fresh_node_id() {
    std::lock_guard<std::mutex> lock(mutex_);
    return next_node_id_++;
}

int InnovationRegistry::peek_next_node_id() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return next_node_id_;
}

int InnovationRegistry::peek_next_edge_id() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return next_edge_id_;
}

std::string InnovationRegistry::to_json() const {
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json j;
    j["format"] = "nevo-registry";
    j["version"] = 1;
    j["next_node_id"] = next_node_id_;
    j["next_edge_id"] = next_edge_id_;
    auto edges = nlohmann::json::array();
    for (const auto& [pair, id] : edge_innovations_) {
        edges.push_back({pair.first, pair.second, id});
    }
    j["edges"] = std::move(edges);
    auto splits = nlohmann::json::array();
    for (const auto& [edge_id, ids] : split_node_innovations_) {
        splits.push_back({edge_id, ids});
    }
    j["split_nodes"] = std::move(splits);
    return j.dump();
}

InnovationRegistry InnovationRegistry::from_json(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(text);
        if (j.value("format", "") != "nevo-registry") {
            throw DataError("not a registry archive");
        }
        if (j.value("version", 0) != 1) {
            throw DataError("unsupported registry archive version");
        }
        InnovationRegistry r;
        r.next_node_id_ = j.at("next_node_id").get<int>();
        r.next_edge_id_ = j.at("next_edge_id").get<int>();
        for (const auto& row : j.at("edges")) {
            r.edge_innovations_[{row.at(0).get<int>(), row.at(1).get<int>()}] =
                row.at(2).get<int>();
        }
        for (const auto& row : j.at("split_nodes")) {
            r.split_node_innovations_[row.at(0).get<int>()] =
                row.at(1).get<std::vector<int>>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad registry archive: ") + e.what());
    }
}

} // namespace nevo
