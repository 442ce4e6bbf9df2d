#include "nevo/genome.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "nevo/errors.hpp"

namespace nevo {

using nlohmann::json;

namespace {

constexpr int kArchiveVersion = 1;

template <typename Gene>
const Gene* find_by_id(const std::vector<Gene>& genes, int id) {
    auto it = std::lower_bound(
        genes.begin(), genes.end(), id,
        [](const Gene& g, int key) { return g.innovation_id < key; });
    if (it == genes.end() || it->innovation_id != id) return nullptr;
    return &*it;
}

} // namespace

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::input: return "input";
        case NodeKind::hidden: return "hidden";
        case NodeKind::output: return "output";
    }
    return "?";
}

const char* to_string(EdgeKind k) {
    return k == EdgeKind::convolutional ? "conv" : "pool";
}

const NodeGene* Genome::find_node(int innovation_id) const {
    return find_by_id(nodes, innovation_id);
}

NodeGene* Genome::find_node(int innovation_id) {
    return const_cast<NodeGene*>(find_by_id(nodes, innovation_id));
}

const EdgeGene* Genome::find_edge(int innovation_id) const {
    return find_by_id(edges, innovation_id);
}

EdgeGene* Genome::find_edge(int innovation_id) {
    return const_cast<EdgeGene*>(find_by_id(edges, innovation_id));
}

const EdgeGene* Genome::find_edge_between(int in_node, int out_node) const {
    for (const auto& e : edges) {
        if (e.in_node == in_node && e.out_node == out_node) return &e;
    }
    return nullptr;
}

void Genome::insert_node(NodeGene n) {
    auto it = std::lower_bound(
        nodes.begin(), nodes.end(), n.innovation_id,
        [](const NodeGene& g, int key) { return g.innovation_id < key; });
    nodes.insert(it, std::move(n));
}

void Genome::insert_edge(EdgeGene e) {
    auto it = std::lower_bound(
        edges.begin(), edges.end(), e.innovation_id,
        [](const EdgeGene& g, int key) { return g.innovation_id < key; });
    edges.insert(it, std::move(e));
}

int Genome::enabled_node_count() const {
    return static_cast<int>(
        std::count_if(nodes.begin(), nodes.end(),
                      [](const NodeGene& n) { return n.enabled; }));
}

int Genome::enabled_edge_count() const {
    return static_cast<int>(
        std::count_if(edges.begin(), edges.end(),
                      [](const EdgeGene& e) { return e.enabled; }));
}

int Genome::enabled_edge_count(EdgeKind kind) const {
    return static_cast<int>(
        std::count_if(edges.begin(), edges.end(), [kind](const EdgeGene& e) {
            return e.enabled && e.kind == kind;
        }));
}

long Genome::trainable_weight_count() const {
    long total = 0;
    for (const auto& e : edges) {
        if (!e.enabled) continue;
        total += static_cast<long>(e.weight_count());
    }
    for (const auto& n : nodes) {
        if (n.enabled && n.kind == NodeKind::hidden) total += 2;  // gamma, beta
    }
    return total;
}

std::pair<int, int> conv_filter_dims(std::pair<int, int> in_dims,
                                     std::pair<int, int> out_dims) {
    return {std::abs(out_dims.first - in_dims.first) + 1,
            std::abs(out_dims.second - in_dims.second) + 1};
}

Genome minimal_genome(int input_size_x, int input_size_y, int num_classes) {
    Genome g;
    g.generated_by = "minimal";

    NodeGene input;
    input.innovation_id = 0;
    input.kind = NodeKind::input;
    input.depth = 0.0;
    input.size_x = input_size_x;
    input.size_y = input_size_y;
    g.insert_node(input);

    for (int c = 0; c < num_classes; ++c) {
        NodeGene out;
        out.innovation_id = 1 + c;
        out.kind = NodeKind::output;
        out.depth = 1.0;
        out.size_x = 1;
        out.size_y = 1;
        g.insert_node(out);

        EdgeGene e;
        e.innovation_id = c;
        e.in_node = 0;
        e.out_node = out.innovation_id;
        e.kind = EdgeKind::convolutional;
        auto [fx, fy] = conv_filter_dims({input_size_x, input_size_y}, {1, 1});
        e.filter_x = fx;
        e.filter_y = fy;
        e.weights.assign(static_cast<std::size_t>(fx) * fy, 0.0);
        g.insert_edge(e);
    }
    return g;
}

bool reachable(const Genome& g) {
    std::unordered_set<int> seen;
    std::deque<int> frontier;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::input && n.enabled) {
            seen.insert(n.innovation_id);
            frontier.push_back(n.innovation_id);
        }
    }
    while (!frontier.empty()) {
        int id = frontier.front();
        frontier.pop_front();
        for (const auto& e : g.edges) {
            if (!e.enabled || e.in_node != id) continue;
            const NodeGene* dst = g.find_node(e.out_node);
            if (!dst || !dst->enabled) continue;
            if (seen.insert(e.out_node).second) frontier.push_back(e.out_node);
        }
    }
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::output && !seen.contains(n.innovation_id)) {
            return false;
        }
    }
    return true;
}

std::vector<int> evaluation_order(const Genome& g) {
    std::vector<const NodeGene*> enabled;
    for (const auto& n : g.nodes) {
        if (n.enabled) enabled.push_back(&n);
    }
    std::sort(enabled.begin(), enabled.end(),
              [](const NodeGene* a, const NodeGene* b) {
                  if (a->depth != b->depth) return a->depth < b->depth;
                  return a->innovation_id < b->innovation_id;
              });
    std::unordered_map<int, std::size_t> position;
    std::vector<int> order;
    order.reserve(enabled.size());
    for (std::size_t i = 0; i < enabled.size(); ++i) {
        position[enabled[i]->innovation_id] = i;
        order.push_back(enabled[i]->innovation_id);
    }
    for (const auto& e : g.edges) {
        if (!e.enabled) continue;
        auto in = position.find(e.in_node);
        auto out = position.find(e.out_node);
        if (in == position.end() || out == position.end() ||
            in->second >= out->second ||
            g.find_node(e.in_node)->depth >= g.find_node(e.out_node)->depth) {
            throw std::runtime_error(
                "evaluation_order: edge " + std::to_string(e.innovation_id) +
                " does not go forward in depth order");
        }
    }
    return order;
}

std::optional<std::string> structural_fault(const Genome& g) {
    auto fail = [](const std::string& msg) {
        return std::optional<std::string>(msg);
    };

    int inputs = 0, outputs = 0;
    std::set<int> node_ids;
    for (const auto& n : g.nodes) {
        if (!node_ids.insert(n.innovation_id).second) {
            return fail("duplicate node innovation " +
                        std::to_string(n.innovation_id));
        }
        switch (n.kind) {
            case NodeKind::input:
                ++inputs;
                if (n.depth != 0.0) return fail("input node depth not 0");
                break;
            case NodeKind::output:
                ++outputs;
                if (n.depth != 1.0) return fail("output node depth not 1");
                if (n.size_x != 1 || n.size_y != 1) {
                    return fail("output node not 1x1");
                }
                break;
            case NodeKind::hidden:
                if (n.depth <= 0.0 || n.depth >= 1.0) {
                    return fail("hidden node depth outside (0,1)");
                }
                break;
        }
        if (n.size_x < 1 || n.size_y < 1) {
            return fail("node " + std::to_string(n.innovation_id) +
                        " has size below 1");
        }
    }
    if (inputs != 1) return fail("genome must have exactly one input node");
    if (outputs < 1) return fail("genome has no output nodes");

    std::set<int> edge_ids;
    std::set<std::pair<int, int>> pairs;
    for (const auto& e : g.edges) {
        if (!edge_ids.insert(e.innovation_id).second) {
            return fail("duplicate edge innovation " +
                        std::to_string(e.innovation_id));
        }
        if (!pairs.insert({e.in_node, e.out_node}).second) {
            return fail("two edges between nodes " + std::to_string(e.in_node) +
                        " and " + std::to_string(e.out_node));
        }
        const NodeGene* in = g.find_node(e.in_node);
        const NodeGene* out = g.find_node(e.out_node);
        if (!in || !out) {
            return fail("edge " + std::to_string(e.innovation_id) +
                        " references a missing node");
        }
        if (in->depth >= out->depth) {
            return fail("edge " + std::to_string(e.innovation_id) +
                        " does not feed forward");
        }
        if (e.enabled && (!in->enabled || !out->enabled)) {
            return fail("enabled edge " + std::to_string(e.innovation_id) +
                        " touches a disabled node");
        }
        if (e.kind == EdgeKind::convolutional) {
            auto [fx, fy] = conv_filter_dims({in->size_x, in->size_y},
                                             {out->size_x, out->size_y});
            if (e.filter_x != fx || e.filter_y != fy) {
                return fail("edge " + std::to_string(e.innovation_id) +
                            " filter size does not match node sizes");
            }
            if (e.weights.size() != static_cast<std::size_t>(fx) * fy) {
                return fail("edge " + std::to_string(e.innovation_id) +
                            " weight count does not match filter size");
            }
        } else {
            if (!e.weights.empty()) {
                return fail("pooling edge " + std::to_string(e.innovation_id) +
                            " carries filter weights");
            }
            if (in->size_x < out->size_x || in->size_y < out->size_y) {
                return fail("pooling edge " + std::to_string(e.innovation_id) +
                            " upscales its feature map");
            }
        }
    }
    return std::nullopt;
}

namespace {

json node_to_json(const NodeGene& n) {
    return json{{"id", n.innovation_id},
                {"kind", to_string(n.kind)},
                {"depth", n.depth},
                {"size_x", n.size_x},
                {"size_y", n.size_y},
                {"enabled", n.enabled},
                {"bn_gamma", n.bn_gamma},
                {"bn_beta", n.bn_beta},
                {"bn_mean", n.bn_running_mean},
                {"bn_var", n.bn_running_var}};
}

json edge_to_json(const EdgeGene& e) {
    json j{{"id", e.innovation_id},
           {"in", e.in_node},
           {"out", e.out_node},
           {"kind", to_string(e.kind)},
           {"enabled", e.enabled}};
    if (e.kind == EdgeKind::convolutional) {
        j["filter_x"] = e.filter_x;
        j["filter_y"] = e.filter_y;
        j["weights"] = e.weights;
    } else {
        j["scale"] = e.scale;
    }
    return j;
}

NodeKind node_kind_from(const std::string& s) {
    if (s == "input") return NodeKind::input;
    if (s == "hidden") return NodeKind::hidden;
    if (s == "output") return NodeKind::output;
    throw DataError("unknown node kind '" + s + "'");
}

EdgeKind edge_kind_from(const std::string& s) {
    if (s == "conv") return EdgeKind::convolutional;
    if (s == "pool") return EdgeKind::pooling;
    throw DataError("unknown edge kind '" + s + "'");
}

NodeGene node_from_json(const json& j) {
    NodeGene n;
    n.innovation_id = j.at("id").get<int>();
    n.kind = node_kind_from(j.at("kind").get<std::string>());
    n.depth = j.at("depth").get<double>();
    n.size_x = j.at("size_x").get<int>();
    n.size_y = j.at("size_y").get<int>();
    n.enabled = j.at("enabled").get<bool>();
    n.bn_gamma = j.at("bn_gamma").get<double>();
    n.bn_beta = j.at("bn_beta").get<double>();
    n.bn_running_mean = j.at("bn_mean").get<double>();
    n.bn_running_var = j.at("bn_var").get<double>();
    return n;
}

EdgeGene edge_from_json(const json& j) {
    EdgeGene e;
    e.innovation_id = j.at("id").get<int>();
    e.in_node = j.at("in").get<int>();
    e.out_node = j.at("out").get<int>();
    e.kind = edge_kind_from(j.at("kind").get<std::string>());
    e.enabled = j.at("enabled").get<bool>();
    if (e.kind == EdgeKind::convolutional) {
        e.filter_x = j.at("filter_x").get<int>();
        e.filter_y = j.at("filter_y").get<int>();
        e.weights = j.at("weights").get<std::vector<double>>();
    } else {
        e.scale = j.at("scale").get<double>();
    }
    return e;
}

} // namespace

std::string serialize(const Genome& g) {
    json j;
    j["format"] = "nevo-genome";
    j["version"] = kArchiveVersion;
    if (g.evaluated()) {
        j["fitness"] = g.fitness;
    } else {
        j["fitness"] = nullptr;
    }
    j["generated_by"] = g.generated_by;
    j["generation_id"] = g.generation_id;
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back(node_to_json(n));
    json edges = json::array();
    for (const auto& e : g.edges) edges.push_back(edge_to_json(e));
    j["nodes"] = std::move(nodes);
    j["edges"] = std::move(edges);
    return j.dump();
}

Genome deserialize(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("genome archive is not valid JSON: ") +
                        e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "nevo-genome") {
            throw DataError("not a genome archive");
        }
        if (j.at("version").get<int>() != kArchiveVersion) {
            throw DataError("unsupported genome archive version " +
                            std::to_string(j.at("version").get<int>()));
        }
        Genome g;
        if (j.at("fitness").is_null()) {
            g.fitness = kUnevaluated;
        } else {
            g.fitness = j.at("fitness").get<double>();
        }
        g.generated_by = j.at("generated_by").get<std::string>();
        g.generation_id = j.at("generation_id").get<std::int64_t>();
        for (const auto& nj : j.at("nodes")) g.insert_node(node_from_json(nj));
        for (const auto& ej : j.at("edges")) g.insert_edge(edge_from_json(ej));
        if (auto fault = structural_fault(g)) {
            throw DataError("genome archive violates invariants: " + *fault);
        }
        return g;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed genome archive: ") + e.what());
    }
}

void save_genome(const Genome& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << serialize(g);
    if (!out) throw DataError("failed writing '" + path + "'");
}

Genome load_genome(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open genome archive '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

std::string export_dot(const Genome& g) {
    std::ostringstream out;
    out << "digraph genome {\n";
    out << "  rankdir=TB;\n";
    out << "  node [shape=box, fontsize=10];\n";
    for (const auto& n : g.nodes) {
        out << "  n" << n.innovation_id << " [label=\"" << n.innovation_id
            << " " << to_string(n.kind) << "\\n" << n.size_x << "x" << n.size_y
            << " d=" << n.depth << "\"";
        if (n.kind == NodeKind::input) out << ", style=filled, fillcolor=lightblue";
        if (n.kind == NodeKind::output) out << ", style=filled, fillcolor=lightyellow";
        if (!n.enabled) out << ", style=dashed";
        out << "];\n";
    }
    for (const auto& e : g.edges) {
        out << "  n" << e.in_node << " -> n" << e.out_node << " [label=\"";
        if (e.kind == EdgeKind::convolutional) {
            out << "conv " << e.filter_x << "x" << e.filter_y;
        } else {
            out << "pool";
        }
        out << "\"";
        if (e.kind == EdgeKind::pooling) out << ", color=firebrick";
        if (!e.enabled) out << ", style=dashed";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

int input_node_id(const Genome& g) {
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::input) return n.innovation_id;
    }
    throw std::runtime_error("genome has no input node");
}

std::vector<int> output_node_ids(const Genome& g) {
    std::vector<int> ids;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::output) ids.push_back(n.innovation_id);
    }
    return ids;  // nodes are id-sorted already
}

} // namespace nevo
