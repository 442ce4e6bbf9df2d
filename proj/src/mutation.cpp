#include "nevo/mutation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace nevo {

const char* op_tag(Op op) {
    switch (op) {
        case Op::disable_edge: return "disable_edge";
        case Op::enable_edge: return "enable_edge";
        case Op::split_edge: return "split_edge";
        case Op::add_edge: return "add_edge";
        case Op::alter_edge_type: return "alter_edge_type";
        case Op::change_node_size: return "change_node_size";
        case Op::change_node_size_x: return "change_node_size_x";
        case Op::change_node_size_y: return "change_node_size_y";
        case Op::add_node: return "add_node";
        case Op::split_node: return "split_node";
        case Op::merge_node: return "merge_node";
        case Op::disable_node: return "disable_node";
        case Op::enable_node: return "enable_node";
    }
    return "?";
}

std::vector<std::pair<Op, double>> OperatorConfig::active_weights() const {
    std::vector<std::pair<Op, double>> v;
    v.emplace_back(Op::disable_edge, w_disable_edge);
    v.emplace_back(Op::enable_edge, w_enable_edge);
    v.emplace_back(Op::split_edge, w_split_edge);
    v.emplace_back(Op::add_edge, w_add_edge);
    if (pooling_enabled) v.emplace_back(Op::alter_edge_type, w_alter_edge_type);
    v.emplace_back(Op::change_node_size, w_change_node_size);
    v.emplace_back(Op::change_node_size_x, w_change_node_size_x);
    v.emplace_back(Op::change_node_size_y, w_change_node_size_y);
    if (node_ops_enabled) {
        v.emplace_back(Op::add_node, w_add_node);
        v.emplace_back(Op::split_node, w_split_node);
        v.emplace_back(Op::merge_node, w_merge_node);
        v.emplace_back(Op::disable_node, w_disable_node);
        v.emplace_back(Op::enable_node, w_enable_node);
    }
    double total = 0.0;
    for (const auto& [op, w] : v) total += w;
    for (auto& [op, w] : v) w /= total;
    return v;
}

namespace {

void prep(const Genome& g, Genome& out, const char* tag) {
    out = g;
    out.fitness = kUnevaluated;
    out.generated_by = tag;
    out.generation_id = -1;
}

bool pool_feasible(const NodeGene& in, const NodeGene& out) {
    return in.size_x >= out.size_x && in.size_y >= out.size_y;
}

EdgeKind roll_kind(const OperatorConfig& cfg, const NodeGene& in,
                   const NodeGene& out, Rng& rng) {
    if (!cfg.pooling_enabled || !pool_feasible(in, out)) {
        return EdgeKind::convolutional;
    }
    return rng.coin() ? EdgeKind::pooling : EdgeKind::convolutional;
}

EdgeGene make_edge(int id, const NodeGene& in, const NodeGene& out,
                   EdgeKind kind) {
    EdgeGene e;
    e.innovation_id = id;
    e.in_node = in.innovation_id;
    e.out_node = out.innovation_id;
    e.kind = kind;
    e.enabled = true;
    if (kind == EdgeKind::convolutional) {
        auto [fx, fy] = conv_filter_dims({in.size_x, in.size_y},
                                         {out.size_x, out.size_y});
        e.filter_x = fx;
        e.filter_y = fy;
        e.weights.assign(static_cast<std::size_t>(fx) * fy, 0.0);
    } else {
        e.filter_x = 0;
        e.filter_y = 0;
        e.scale = 1.0;
    }
    return e;
}

std::vector<int> enabled_edge_indices(const Genome& g) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        if (g.edges[i].enabled) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

std::vector<int> enabled_hidden_indices(const Genome& g) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].enabled && g.nodes[i].kind == NodeKind::hidden) {
            idx.push_back(static_cast<int>(i));
        }
    }
    return idx;
}

// First k elements of a partial Fisher-Yates shuffle; pass k == pool.size()
// for a full shuffle. Consumes exactly k draws.
std::vector<int> sample_without_replacement(std::vector<int> pool, int k,
                                            Rng& rng) {
    for (int i = 0; i < k; ++i) {
        int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

} // namespace

OpOutcome mutate_disable_edge(const Genome& g, Rng& rng, Genome& out) {
    auto idx = enabled_edge_indices(g);
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "disable_edge");
    out.edges[static_cast<std::size_t>(
                  idx[static_cast<std::size_t>(rng.uniform_int(
                      static_cast<int>(idx.size())))])]
        .enabled = false;
    return OpOutcome::ok;
}

OpOutcome mutate_enable_edge(const Genome& g, Rng& rng, Genome& out) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        if (!g.edges[i].enabled) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "enable_edge");
    auto& e = out.edges[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];
    e.enabled = true;
    return OpOutcome::ok;
}

OpOutcome mutate_split_edge(const Genome& g, InnovationRegistry& reg,
                            const OperatorConfig& cfg, Rng& rng, Genome& out) {
    auto idx = enabled_edge_indices(g);
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "split_edge");
    int pick = idx[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(idx.size())))];
    auto& target = out.edges[static_cast<std::size_t>(pick)];
    target.enabled = false;
    const NodeGene in = *out.find_node(target.in_node);
    const NodeGene dst = *out.find_node(target.out_node);

    NodeGene mid;
    mid.innovation_id = reg.node_id_for_split(target.innovation_id, g);
    mid.kind = NodeKind::hidden;
    mid.depth = 0.5 * (in.depth + dst.depth);
    mid.size_x = (in.size_x + dst.size_x + 1) / 2;
    mid.size_y = (in.size_y + dst.size_y + 1) / 2;
    out.insert_node(mid);

    EdgeKind k1 = roll_kind(cfg, in, mid, rng);
    out.insert_edge(make_edge(reg.edge_id(in.innovation_id, mid.innovation_id),
                              in, mid, k1));
    EdgeKind k2 = roll_kind(cfg, mid, dst, rng);
    out.insert_edge(make_edge(reg.edge_id(mid.innovation_id, dst.innovation_id),
                              mid, dst, k2));
    return OpOutcome::ok;
}

OpOutcome mutate_add_edge(const Genome& g, InnovationRegistry& reg,
                          const OperatorConfig& cfg, Rng& rng, Genome& out) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& a : g.nodes) {
        if (!a.enabled) continue;
        for (const auto& b : g.nodes) {
            if (!b.enabled || a.depth >= b.depth) continue;
            if (g.find_edge_between(a.innovation_id, b.innovation_id)) continue;
            pairs.emplace_back(a.innovation_id, b.innovation_id);
        }
    }
    if (pairs.empty()) return OpOutcome::inapplicable;
    prep(g, out, "add_edge");
    auto [in_id, out_id] = pairs[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(pairs.size())))];
    const NodeGene in = *out.find_node(in_id);
    const NodeGene dst = *out.find_node(out_id);
    EdgeKind kind = roll_kind(cfg, in, dst, rng);
    out.insert_edge(make_edge(reg.edge_id(in_id, out_id), in, dst, kind));
    return OpOutcome::ok;
}

OpOutcome mutate_alter_edge_type(const Genome& g, const OperatorConfig& cfg,
                                 Rng& rng, Genome& out) {
    if (!cfg.pooling_enabled) return OpOutcome::inapplicable;
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto& e = g.edges[i];
        if (!e.enabled) continue;
        if (e.kind == EdgeKind::convolutional) {
            const NodeGene* in = g.find_node(e.in_node);
            const NodeGene* dst = g.find_node(e.out_node);
            if (!pool_feasible(*in, *dst)) continue;
        }
        idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "alter_edge_type");
    auto& e = out.edges[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];
    if (e.kind == EdgeKind::convolutional) {
        e.kind = EdgeKind::pooling;
        e.filter_x = 0;
        e.filter_y = 0;
        e.weights.clear();
        e.scale = 1.0;
    } else {
        const NodeGene* in = out.find_node(e.in_node);
        const NodeGene* dst = out.find_node(e.out_node);
        e.kind = EdgeKind::convolutional;
        auto [fx, fy] = conv_filter_dims({in->size_x, in->size_y},
                                         {dst->size_x, dst->size_y});
        e.filter_x = fx;
        e.filter_y = fy;
        e.weights.assign(static_cast<std::size_t>(fx) * fy, 0.0);
        e.scale = 1.0;
    }
    return OpOutcome::ok;
}

OpOutcome mutate_change_node_size(const Genome& g, Axis axis,
                                  const OperatorConfig& cfg, Rng& rng,
                                  Genome& out) {
    auto idx = enabled_hidden_indices(g);
    if (idx.empty()) return OpOutcome::inapplicable;
    const char* tag = axis == Axis::both  ? "change_node_size"
                      : axis == Axis::x   ? "change_node_size_x"
                                          : "change_node_size_y";
    prep(g, out, tag);
    auto& n = out.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];
    int delta = cfg.size_deltas[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(cfg.size_deltas.size())))];
    int nx = n.size_x + (axis != Axis::y ? delta : 0);
    int ny = n.size_y + (axis != Axis::x ? delta : 0);
    if (nx < 1 || ny < 1) return OpOutcome::discard;
    n.size_x = nx;
    n.size_y = ny;
    for (auto& e : out.edges) {
        if (e.in_node != n.innovation_id && e.out_node != n.innovation_id) {
            continue;
        }
        const NodeGene* in = out.find_node(e.in_node);
        const NodeGene* dst = out.find_node(e.out_node);
        if (e.kind == EdgeKind::convolutional) {
            auto [fx, fy] = conv_filter_dims({in->size_x, in->size_y},
                                             {dst->size_x, dst->size_y});
            if (fx != e.filter_x || fy != e.filter_y) {
                // Keep the overlapping top-left block; epigenetic init fills
                // the rest.
                std::vector<double> w(static_cast<std::size_t>(fx) * fy, 0.0);
                for (int y = 0; y < std::min(fy, e.filter_y); ++y) {
                    for (int x = 0; x < std::min(fx, e.filter_x); ++x) {
                        w[static_cast<std::size_t>(y) * fx + x] =
                            e.weights[static_cast<std::size_t>(y) * e.filter_x +
                                      x];
                    }
                }
                e.filter_x = fx;
                e.filter_y = fy;
                e.weights = std::move(w);
            }
        } else if (!pool_feasible(*in, *dst)) {
            return OpOutcome::discard;
        }
    }
    return OpOutcome::ok;
}

OpOutcome mutate_add_node(const Genome& g, InnovationRegistry& reg,
                          const OperatorConfig& cfg, Rng& rng, Genome& out) {
    double depth = 0.0;
    do {
        depth = rng.uniform();
    } while (depth <= 0.0);

    std::vector<int> shallower;
    std::vector<int> deeper;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (!g.nodes[i].enabled) continue;
        if (g.nodes[i].depth < depth) shallower.push_back(static_cast<int>(i));
        if (g.nodes[i].depth > depth) deeper.push_back(static_cast<int>(i));
    }
    if (shallower.empty() || deeper.empty()) return OpOutcome::inapplicable;

    int want_in = 1 + rng.uniform_int(5);
    int want_out = 1 + rng.uniform_int(5);
    want_in = std::min(want_in, static_cast<int>(shallower.size()));
    want_out = std::min(want_out, static_cast<int>(deeper.size()));
    auto chosen_in = sample_without_replacement(shallower, want_in, rng);
    auto chosen_out = sample_without_replacement(deeper, want_out, rng);
    std::sort(chosen_in.begin(), chosen_in.end());
    std::sort(chosen_out.begin(), chosen_out.end());

    int max_in_x = 0, max_in_y = 0;
    for (int i : chosen_in) {
        max_in_x = std::max(max_in_x, g.nodes[static_cast<std::size_t>(i)].size_x);
        max_in_y = std::max(max_in_y, g.nodes[static_cast<std::size_t>(i)].size_y);
    }
    int min_out_x = g.nodes[static_cast<std::size_t>(chosen_out[0])].size_x;
    int min_out_y = g.nodes[static_cast<std::size_t>(chosen_out[0])].size_y;
    for (int i : chosen_out) {
        min_out_x = std::min(min_out_x, g.nodes[static_cast<std::size_t>(i)].size_x);
        min_out_y = std::min(min_out_y, g.nodes[static_cast<std::size_t>(i)].size_y);
    }

    prep(g, out, "add_node");
    NodeGene n;
    n.innovation_id = reg.fresh_node_id();
    n.kind = NodeKind::hidden;
    n.depth = depth;
    n.size_x = (max_in_x + min_out_x + 1) / 2;
    n.size_y = (max_in_y + min_out_y + 1) / 2;
    out.insert_node(n);
    for (int i : chosen_in) {
        const NodeGene src = g.nodes[static_cast<std::size_t>(i)];
        EdgeKind kind = roll_kind(cfg, src, n, rng);
        out.insert_edge(
            make_edge(reg.edge_id(src.innovation_id, n.innovation_id), src, n,
                      kind));
    }
    for (int i : chosen_out) {
        const NodeGene dst = g.nodes[static_cast<std::size_t>(i)];
        EdgeKind kind = roll_kind(cfg, n, dst, rng);
        out.insert_edge(
            make_edge(reg.edge_id(n.innovation_id, dst.innovation_id), n, dst,
                      kind));
    }
    return OpOutcome::ok;
}

OpOutcome mutate_split_node(const Genome& g, InnovationRegistry& reg,
                            Rng& rng, Genome& out) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        if (!n.enabled || n.kind != NodeKind::hidden) continue;
        bool has_in = false, has_out = false;
        for (const auto& e : g.edges) {
            if (!e.enabled) continue;
            if (e.out_node == n.innovation_id) has_in = true;
            if (e.in_node == n.innovation_id) has_out = true;
        }
        if (has_in && has_out) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) return OpOutcome::inapplicable;

    prep(g, out, "split_node");
    const NodeGene target = g.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];

    std::vector<int> in_edges;
    std::vector<int> out_edges;
    for (auto& e : out.edges) {
        if (!e.enabled) continue;
        if (e.out_node == target.innovation_id) {
            in_edges.push_back(e.innovation_id);
            e.enabled = false;
        } else if (e.in_node == target.innovation_id) {
            out_edges.push_back(e.innovation_id);
            e.enabled = false;
        }
    }
    out.find_node(target.innovation_id)->enabled = false;

    NodeGene a;
    a.innovation_id = reg.fresh_node_id();
    a.kind = NodeKind::hidden;
    a.depth = target.depth;
    a.size_x = target.size_x;
    a.size_y = target.size_y;
    NodeGene b = a;
    b.innovation_id = reg.fresh_node_id();
    out.insert_node(a);
    out.insert_node(b);

    // Each child keeps at least one edge from each side; a lone edge goes to
    // both children.
    auto assign = [&](const std::vector<int>& edge_ids)
        -> std::pair<std::vector<int>, std::vector<int>> {
        if (edge_ids.size() == 1) return {edge_ids, edge_ids};
        auto shuffled = sample_without_replacement(
            edge_ids, static_cast<int>(edge_ids.size()), rng);
        std::vector<int> to_a{shuffled[0]};
        std::vector<int> to_b{shuffled[1]};
        for (std::size_t i = 2; i < shuffled.size(); ++i) {
            (rng.coin() ? to_a : to_b).push_back(shuffled[i]);
        }
        std::sort(to_a.begin(), to_a.end());
        std::sort(to_b.begin(), to_b.end());
        return {to_a, to_b};
    };
    auto [in_a, in_b] = assign(in_edges);
    auto [out_a, out_b] = assign(out_edges);

    auto reconnect = [&](const std::vector<int>& edge_ids,
                         const NodeGene& child, bool incoming) {
        for (int id : edge_ids) {
            const EdgeGene* old = g.find_edge(id);
            if (incoming) {
                const NodeGene src = *out.find_node(old->in_node);
                out.insert_edge(
                    make_edge(reg.edge_id(src.innovation_id,
                                          child.innovation_id),
                              src, child, old->kind));
            } else {
                const NodeGene dst = *out.find_node(old->out_node);
                out.insert_edge(
                    make_edge(reg.edge_id(child.innovation_id,
                                          dst.innovation_id),
                              child, dst, old->kind));
            }
        }
    };
    reconnect(in_a, a, true);
    reconnect(in_b, b, true);
    reconnect(out_a, a, false);
    reconnect(out_b, b, false);
    return OpOutcome::ok;
}

OpOutcome mutate_merge_node(const Genome& g, InnovationRegistry& reg,
                            const OperatorConfig& cfg, Rng& rng, Genome& out) {
    auto idx = enabled_hidden_indices(g);
    if (idx.size() < 2) return OpOutcome::inapplicable;
    prep(g, out, "merge_node");
    int i = rng.uniform_int(static_cast<int>(idx.size()));
    int j = rng.uniform_int(static_cast<int>(idx.size()) - 1);
    if (j >= i) ++j;
    const NodeGene na = g.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(i)])];
    const NodeGene nb = g.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(j)])];

    out.find_node(na.innovation_id)->enabled = false;
    out.find_node(nb.innovation_id)->enabled = false;

    // Neighbor -> edge kind of the first (lowest edge id) replaced edge.
    std::map<int, EdgeKind> neighbors;
    for (auto& e : out.edges) {
        if (!e.enabled) continue;
        bool touches_a = e.in_node == na.innovation_id ||
                         e.out_node == na.innovation_id;
        bool touches_b = e.in_node == nb.innovation_id ||
                         e.out_node == nb.innovation_id;
        if (!touches_a && !touches_b) continue;
        e.enabled = false;
        int other = (e.in_node == na.innovation_id ||
                     e.in_node == nb.innovation_id)
                        ? e.out_node
                        : e.in_node;
        if (other == na.innovation_id || other == nb.innovation_id) continue;
        neighbors.emplace(other, e.kind);
    }

    NodeGene merged;
    merged.innovation_id = reg.fresh_node_id();
    merged.kind = NodeKind::hidden;
    merged.depth = 0.5 * (na.depth + nb.depth);
    merged.size_x = (na.size_x + nb.size_x + 1) / 2;
    merged.size_y = (na.size_y + nb.size_y + 1) / 2;
    out.insert_node(merged);

    for (const auto& [other_id, kind] : neighbors) {
        const NodeGene other = *out.find_node(other_id);
        if (other.depth == merged.depth) continue;
        const NodeGene& in = other.depth < merged.depth ? other : merged;
        const NodeGene& dst = other.depth < merged.depth ? merged : other;
        if (out.find_edge_between(in.innovation_id, dst.innovation_id)) {
            continue;
        }
        EdgeKind k = kind;
        if (k == EdgeKind::pooling && !pool_feasible(in, dst)) {
            k = EdgeKind::convolutional;
        }
        out.insert_edge(
            make_edge(reg.edge_id(in.innovation_id, dst.innovation_id), in,
                      dst, k));
    }
    return OpOutcome::ok;
}

OpOutcome mutate_disable_node(const Genome& g, Rng& rng, Genome& out) {
    auto idx = enabled_hidden_indices(g);
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "disable_node");
    auto& n = out.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];
    n.enabled = false;
    for (auto& e : out.edges) {
        if (e.in_node == n.innovation_id || e.out_node == n.innovation_id) {
            e.enabled = false;
        }
    }
    return OpOutcome::ok;
}

OpOutcome mutate_enable_node(const Genome& g, Rng& rng, Genome& out) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (!g.nodes[i].enabled) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) return OpOutcome::inapplicable;
    prep(g, out, "enable_node");
    auto& n = out.nodes[static_cast<std::size_t>(
        idx[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(idx.size())))])];
    n.enabled = true;
    for (auto& e : out.edges) {
        int other_id = -1;
        if (e.in_node == n.innovation_id) {
            other_id = e.out_node;
        } else if (e.out_node == n.innovation_id) {
            other_id = e.in_node;
        } else {
            continue;
        }
        if (out.find_node(other_id)->enabled) e.enabled = true;
    }
    return OpOutcome::ok;
}

OpOutcome apply_operator(Op op, const Genome& g, InnovationRegistry& reg,
                         const OperatorConfig& cfg, Rng& rng, Genome& out) {
    switch (op) {
        case Op::disable_edge: return mutate_disable_edge(g, rng, out);
        case Op::enable_edge: return mutate_enable_edge(g, rng, out);
        case Op::split_edge: return mutate_split_edge(g, reg, cfg, rng, out);
        case Op::add_edge: return mutate_add_edge(g, reg, cfg, rng, out);
        case Op::alter_edge_type:
            return mutate_alter_edge_type(g, cfg, rng, out);
        case Op::change_node_size:
            return mutate_change_node_size(g, Axis::both, cfg, rng, out);
        case Op::change_node_size_x:
            return mutate_change_node_size(g, Axis::x, cfg, rng, out);
        case Op::change_node_size_y:
            return mutate_change_node_size(g, Axis::y, cfg, rng, out);
        case Op::add_node: return mutate_add_node(g, reg, cfg, rng, out);
        case Op::split_node: return mutate_split_node(g, reg, rng, out);
        case Op::merge_node: return mutate_merge_node(g, reg, cfg, rng, out);
        case Op::disable_node: return mutate_disable_node(g, rng, out);
        case Op::enable_node: return mutate_enable_node(g, rng, out);
    }
    return OpOutcome::inapplicable;
}

bool fitter(const Genome& a, const Genome& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    return a.generation_id <= b.generation_id;
}

Genome crossover(const Genome& more_fit, const Genome& less_fit,
                 const OperatorConfig& cfg, Rng& rng) {
    Genome child;
    child.fitness = kUnevaluated;
    child.generated_by = "crossover";
    child.generation_id = -1;

    std::size_t i = 0, j = 0;
    while (i < more_fit.edges.size() || j < less_fit.edges.size()) {
        bool from_more = j >= less_fit.edges.size() ||
                         (i < more_fit.edges.size() &&
                          more_fit.edges[i].innovation_id <=
                              less_fit.edges[j].innovation_id);
        if (from_more && j < less_fit.edges.size() &&
            more_fit.edges[i].innovation_id ==
                less_fit.edges[j].innovation_id) {
            child.edges.push_back(more_fit.edges[i]);
            ++i;
            ++j;
        } else if (from_more) {
            EdgeGene e = more_fit.edges[i++];
            if (!rng.coin(cfg.more_fit_rate)) e.enabled = false;
            child.edges.push_back(std::move(e));
        } else {
            EdgeGene e = less_fit.edges[j++];
            if (!rng.coin(cfg.less_fit_rate)) e.enabled = false;
            child.edges.push_back(std::move(e));
        }
    }

    std::set<int> node_ids;
    for (const auto& e : child.edges) {
        node_ids.insert(e.in_node);
        node_ids.insert(e.out_node);
    }
    for (int id : node_ids) {
        const NodeGene* n = more_fit.find_node(id);
        if (!n) n = less_fit.find_node(id);
        child.nodes.push_back(*n);
    }

    // Mixing nodes from two parents can orphan an enabled edge or change a
    // feature map size out from under a filter; repair both.
    for (auto& e : child.edges) {
        const NodeGene* in = child.find_node(e.in_node);
        const NodeGene* dst = child.find_node(e.out_node);
        if (e.enabled && (!in->enabled || !dst->enabled)) e.enabled = false;
        if (e.kind == EdgeKind::convolutional) {
            auto [fx, fy] = conv_filter_dims({in->size_x, in->size_y},
                                             {dst->size_x, dst->size_y});
            if (fx != e.filter_x || fy != e.filter_y) {
                e.filter_x = fx;
                e.filter_y = fy;
                e.weights.assign(static_cast<std::size_t>(fx) * fy, 0.0);
            }
        }
    }
    return child;
}

CandidateResult generate_candidate(std::span<const Genome> population,
                                   const OperatorConfig& cfg,
                                   InnovationRegistry& reg, Rng& rng,
                                   bool allow_crossover) {
    if (population.empty()) {
        throw std::runtime_error("generate_candidate: empty population");
    }
    auto weights = cfg.active_weights();
    std::vector<std::size_t> evaluated;
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (population[i].evaluated()) evaluated.push_back(i);
    }

    // One path decision per call; retries below re-pick parents/operators but
    // stay on the chosen path so the crossover fraction tracks the rate.
    bool do_cross = allow_crossover && evaluated.size() >= 2 &&
                    rng.coin(cfg.crossover_rate);

    for (int attempt = 0; attempt < cfg.max_candidate_attempts; ++attempt) {
        Genome cand;
        std::vector<const Genome*> parents;
        if (do_cross) {
            int a = rng.uniform_int(static_cast<int>(evaluated.size()));
            int b = rng.uniform_int(static_cast<int>(evaluated.size()) - 1);
            if (b >= a) ++b;
            const Genome* pa = &population[evaluated[static_cast<std::size_t>(a)]];
            const Genome* pb = &population[evaluated[static_cast<std::size_t>(b)]];
            if (!fitter(*pa, *pb)) std::swap(pa, pb);
            cand = crossover(*pa, *pb, cfg, rng);
            parents = {pa, pb};
        } else {
            const Genome& src = population[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(population.size())))];
            double u = rng.uniform();
            Op op = weights.back().first;
            double acc = 0.0;
            for (const auto& [o, w] : weights) {
                acc += w;
                if (u < acc) {
                    op = o;
                    break;
                }
            }
            if (apply_operator(op, src, reg, cfg, rng, cand) != OpOutcome::ok) {
                continue;
            }
            parents = {&src};
        }
        if (structural_fault(cand)) continue;
        if (!reachable(cand)) continue;
        return {std::move(cand), std::move(parents)};
    }
    throw std::runtime_error(
        "generate_candidate: no valid candidate after " +
        std::to_string(cfg.max_candidate_attempts) + " attempts");
}

} // namespace nevo
