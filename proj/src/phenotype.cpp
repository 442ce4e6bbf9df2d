#include "nevo/phenotype.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "nevo/kernels.hpp"

namespace nevo {

namespace {

double bounded_leaky_relu(double z, double leak, double cap) {
    if (z < 0.0) return leak * z;
    if (z > cap) return cap + leak * (z - cap);
    return z;
}

double bounded_leaky_relu_grad(double z, double leak, double cap) {
    return (z < 0.0 || z > cap) ? leak : 1.0;
}

} // namespace

Phenotype::Phenotype(const Genome& g, const NetConfig& cfg,
                     std::uint64_t pooling_seed)
    : cfg_(cfg), rng_(pooling_seed) {
    const std::vector<int> order = evaluation_order(g);
    std::map<int, int> slot_of;
    nodes_.reserve(order.size());
    for (int id : order) {
        const NodeGene* gene = g.find_node(id);
        Node n;
        n.gene_id = id;
        n.kind = gene->kind;
        n.sx = gene->size_x;
        n.sy = gene->size_y;
        n.running_mean = gene->bn_running_mean;
        n.running_var = gene->bn_running_var;
        slot_of[id] = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(n));
    }
    if (nodes_.empty() || nodes_[0].kind != NodeKind::input) {
        throw std::runtime_error("phenotype: evaluation order must start at the input");
    }

    for (int id : output_node_ids(g)) {
        const int slot = slot_of.at(id);
        if (nodes_[slot].sx != 1 || nodes_[slot].sy != 1) {
            throw std::runtime_error("phenotype: output nodes must be 1x1");
        }
        outputs_.push_back(slot);
    }
    if (outputs_.empty()) {
        throw std::runtime_error("phenotype: genome has no output nodes");
    }

    // Edge plan: grouped by destination node in evaluation order, ascending
    // edge innovation id inside a group. Edge parameters occupy the decayed
    // prefix of params_.
    for (std::size_t slot = 1; slot < nodes_.size(); ++slot) {
        Node& node = nodes_[slot];
        for (const EdgeGene& eg : g.edges) {
            if (!eg.enabled || eg.out_node != node.gene_id) continue;
            Edge e;
            e.gene_id = eg.innovation_id;
            e.in_slot = slot_of.at(eg.in_node);
            e.out_slot = static_cast<int>(slot);
            e.kind = eg.kind;
            const Node& src = nodes_[static_cast<std::size_t>(e.in_slot)];
            e.param_off = params_.size();
            if (eg.kind == EdgeKind::convolutional) {
                const auto [fx, fy] = conv_filter_dims({src.sx, src.sy},
                                                       {node.sx, node.sy});
                e.fx = fx;
                e.fy = fy;
                if (eg.filter_x != fx || eg.filter_y != fy ||
                    eg.weights.size() != static_cast<std::size_t>(fx) * fy) {
                    throw std::runtime_error(
                        "phenotype: filter shape mismatch on edge " +
                        std::to_string(eg.innovation_id));
                }
                params_.insert(params_.end(), eg.weights.begin(), eg.weights.end());
            } else {
                if (src.sx < node.sx || src.sy < node.sy) {
                    throw std::runtime_error(
                        "phenotype: pooling edge upscales on edge " +
                        std::to_string(eg.innovation_id));
                }
                e.canon_x = kernels::canonical_partition(src.sx, node.sx);
                e.canon_y = kernels::canonical_partition(src.sy, node.sy);
                params_.push_back(eg.scale);
            }
            node.in_edges.push_back(static_cast<int>(edges_.size()));
            edges_.push_back(std::move(e));
        }
    }
    decayed_count_ = params_.size();

    for (Node& n : nodes_) {
        if (n.kind != NodeKind::hidden) continue;
        const NodeGene* gene = g.find_node(n.gene_id);
        n.bn_off = params_.size();
        params_.push_back(gene->bn_gamma);
        params_.push_back(gene->bn_beta);
    }
    grads_.assign(params_.size(), 0.0);

    if (cfg_.freeze_pooling) {
        for (Edge& e : edges_) {
            if (e.kind != EdgeKind::pooling) continue;
            const Node& src = nodes_[static_cast<std::size_t>(e.in_slot)];
            const Node& dst = nodes_[static_cast<std::size_t>(e.out_slot)];
            e.part_x = kernels::pooling_partition(src.sx, dst.sx, rng_);
            e.part_y = kernels::pooling_partition(src.sy, dst.sy, rng_);
        }
    }
}

void Phenotype::ensure_capacity(int batch) {
    if (batch <= capacity_) return;
    capacity_ = batch;
    const std::size_t cap = static_cast<std::size_t>(capacity_);
    for (Node& n : nodes_) {
        const std::size_t m = cap * n.sy * n.sx;
        n.act.resize(m);
        n.d_act.resize(m);
        if (n.kind != NodeKind::input) {
            n.sum.resize(m);
            n.d_sum.resize(m);
        }
        if (n.kind == NodeKind::hidden) {
            n.xhat.resize(m);
            n.z.resize(m);
        }
    }
    for (Edge& e : edges_) {
        const Node& dst = nodes_[static_cast<std::size_t>(e.out_slot)];
        if (e.kind == EdgeKind::pooling) {
            e.argmax.resize(cap * dst.sy * dst.sx);
        }
    }
    logits_.resize(cap * outputs_.size());
    probs_.resize(cap * outputs_.size());
}

void Phenotype::run_edge_forward(Edge& e, bool training) {
    const Node& src = nodes_[static_cast<std::size_t>(e.in_slot)];
    Node& dst = nodes_[static_cast<std::size_t>(e.out_slot)];
    if (e.kind == EdgeKind::convolutional) {
        kernels::conv_forward(src.act.data(), src.sx, src.sy, dst.sum.data(),
                              dst.sx, dst.sy, params_.data() + e.param_off,
                              e.fx, e.fy, batch_);
        return;
    }
    if (!cfg_.freeze_pooling) {
        if (training) {
            e.part_x = kernels::pooling_partition(src.sx, dst.sx, rng_);
            e.part_y = kernels::pooling_partition(src.sy, dst.sy, rng_);
        } else {
            e.part_x = e.canon_x;
            e.part_y = e.canon_y;
        }
    }
    kernels::pool_forward(src.act.data(), src.sx, src.sy, dst.sum.data(),
                          dst.sx, dst.sy, e.part_x.data(), e.part_y.data(),
                          params_[e.param_off], batch_, e.argmax.data());
}

void Phenotype::forward(const double* images, int batch, bool training) {
    if (batch < 1) throw std::runtime_error("phenotype: batch must be positive");
    batch_ = batch;
    ensure_capacity(batch);
    trained_forward_ = training;
    finite_ = true;

    Node& in = nodes_[0];
    std::copy(images, images + elems(in), in.act.begin());

    for (std::size_t slot = 1; slot < nodes_.size(); ++slot) {
        Node& node = nodes_[slot];
        std::fill(node.sum.begin(), node.sum.begin() + elems(node), 0.0);
        for (int ei : node.in_edges) {
            run_edge_forward(edges_[static_cast<std::size_t>(ei)], training);
        }
        const std::size_t n = elems(node);
        if (node.kind == NodeKind::hidden) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += node.sum[i];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = node.sum[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            if (training) {
                node.running_mean =
                    node.running_mean * (1.0 - cfg_.bn_alpha) + cfg_.bn_alpha * mean;
                node.running_var =
                    node.running_var * (1.0 - cfg_.bn_alpha) + cfg_.bn_alpha * var;
            } else {
                mean = node.running_mean;
                var = node.running_var;
            }
            node.mean = mean;
            node.inv_std = 1.0 / std::sqrt(var + cfg_.bn_epsilon);
            const double gamma = params_[node.bn_off];
            const double beta = params_[node.bn_off + 1];
            for (std::size_t i = 0; i < n; ++i) {
                const double xh = (node.sum[i] - mean) * node.inv_std;
                const double z = gamma * xh + beta;
                node.xhat[i] = xh;
                node.z[i] = z;
                node.act[i] = bounded_leaky_relu(z, cfg_.relu_leak, cfg_.relu_max);
            }
        } else {
            std::copy(node.sum.begin(), node.sum.begin() + n, node.act.begin());
        }
    }

    const int classes = num_classes();
    for (int s = 0; s < batch_; ++s) {
        double* lrow = logits_.data() + static_cast<std::size_t>(s) * classes;
        for (int c = 0; c < classes; ++c) {
            lrow[c] = nodes_[static_cast<std::size_t>(outputs_[c])].act[s];
            if (!std::isfinite(lrow[c])) finite_ = false;
        }
    }
    if (!finite_) return;
    for (int s = 0; s < batch_; ++s) {
        const double* lrow = logits_.data() + static_cast<std::size_t>(s) * classes;
        double* prow = probs_.data() + static_cast<std::size_t>(s) * classes;
        double m = lrow[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, lrow[c]);
        double z = 0.0;
        for (int c = 0; c < classes; ++c) {
            prow[c] = std::exp(lrow[c] - m);
            z += prow[c];
        }
        for (int c = 0; c < classes; ++c) prow[c] /= z;
    }
}

double Phenotype::total_cross_entropy(const int* labels) const {
    if (!finite_) return std::numeric_limits<double>::infinity();
    const int classes = num_classes();
    double total = 0.0;
    for (int s = 0; s < batch_; ++s) {
        total -= std::log(
            probs_[static_cast<std::size_t>(s) * classes + labels[s]]);
    }
    return total;
}

int Phenotype::correct_predictions(const int* labels) const {
    int correct = 0;
    for (int s = 0; s < batch_; ++s) correct += predict(s) == labels[s];
    return correct;
}

int Phenotype::predict(int sample) const {
    const int classes = num_classes();
    const double* lrow =
        logits_.data() + static_cast<std::size_t>(sample) * classes;
    int best = 0;
    for (int c = 1; c < classes; ++c) {
        if (lrow[c] > lrow[best]) best = c;
    }
    return best;
}

double Phenotype::logit(int sample, int cls) const {
    return logits_[static_cast<std::size_t>(sample) * num_classes() + cls];
}

double Phenotype::probability(int sample, int cls) const {
    return probs_[static_cast<std::size_t>(sample) * num_classes() + cls];
}

double Phenotype::backward(const int* labels) {
    if (!trained_forward_) {
        throw std::runtime_error("phenotype: backward needs a training-mode forward");
    }
    std::fill(grads_.begin(), grads_.end(), 0.0);
    if (!finite_) return std::numeric_limits<double>::infinity();
    const int classes = num_classes();
    for (Node& n : nodes_) {
        std::fill(n.d_act.begin(), n.d_act.begin() + elems(n), 0.0);
    }
    for (int c = 0; c < classes; ++c) {
        Node& out = nodes_[static_cast<std::size_t>(outputs_[c])];
        for (int s = 0; s < batch_; ++s) {
            const double p = probs_[static_cast<std::size_t>(s) * classes + c];
            out.d_sum[s] =
                (p - (labels[s] == c ? 1.0 : 0.0)) / static_cast<double>(batch_);
        }
    }

    for (std::size_t slot = nodes_.size(); slot-- > 1;) {
        Node& node = nodes_[slot];
        const std::size_t n = elems(node);
        if (node.kind == NodeKind::hidden) {
            // d_sum is used as the dz scratch, then overwritten with the
            // batch-norm input gradient.
            const double gamma = params_[node.bn_off];
            double sum_dz = 0.0, sum_dz_xhat = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dz = node.d_act[i] *
                                  bounded_leaky_relu_grad(node.z[i], cfg_.relu_leak,
                                                          cfg_.relu_max);
                node.d_sum[i] = dz;
                sum_dz += dz;
                sum_dz_xhat += dz * node.xhat[i];
            }
            grads_[node.bn_off] = sum_dz_xhat;     // d gamma
            grads_[node.bn_off + 1] = sum_dz;      // d beta
            const double inv_n = 1.0 / static_cast<double>(n);
            const double k = gamma * node.inv_std;
            for (std::size_t i = 0; i < n; ++i) {
                node.d_sum[i] = k * (node.d_sum[i] - sum_dz * inv_n -
                                     node.xhat[i] * sum_dz_xhat * inv_n);
            }
        }
        for (int ei : node.in_edges) {
            Edge& e = edges_[static_cast<std::size_t>(ei)];
            Node& src = nodes_[static_cast<std::size_t>(e.in_slot)];
            if (e.kind == EdgeKind::convolutional) {
                kernels::conv_backward_weights(src.act.data(), src.sx, src.sy,
                                               node.d_sum.data(), node.sx,
                                               node.sy,
                                               grads_.data() + e.param_off,
                                               e.fx, e.fy, batch_);
                kernels::conv_backward_input(src.d_act.data(), src.sx, src.sy,
                                             node.d_sum.data(), node.sx,
                                             node.sy,
                                             params_.data() + e.param_off,
                                             e.fx, e.fy, batch_);
            } else {
                kernels::pool_backward(src.act.data(), src.d_act.data(), src.sx,
                                       src.sy, node.d_sum.data(), node.sx,
                                       node.sy, e.argmax.data(),
                                       params_[e.param_off], batch_,
                                       grads_.data() + e.param_off);
            }
        }
    }
    return total_cross_entropy(labels);
}

void Phenotype::write_back(Genome& g) const {
    for (const Edge& e : edges_) {
        EdgeGene* gene = g.find_edge(e.gene_id);
        if (gene == nullptr) {
            throw std::runtime_error("phenotype: write_back target lacks edge " +
                                     std::to_string(e.gene_id));
        }
        if (e.kind == EdgeKind::convolutional) {
            gene->weights.assign(
                params_.begin() + static_cast<std::ptrdiff_t>(e.param_off),
                params_.begin() +
                    static_cast<std::ptrdiff_t>(e.param_off +
                                                static_cast<std::size_t>(e.fx) *
                                                    e.fy));
        } else {
            gene->scale = params_[e.param_off];
        }
    }
    for (const Node& n : nodes_) {
        if (n.kind != NodeKind::hidden) continue;
        NodeGene* gene = g.find_node(n.gene_id);
        if (gene == nullptr) {
            throw std::runtime_error("phenotype: write_back target lacks node " +
                                     std::to_string(n.gene_id));
        }
        gene->bn_gamma = params_[n.bn_off];
        gene->bn_beta = params_[n.bn_off + 1];
        gene->bn_running_mean = n.running_mean;
        gene->bn_running_var = n.running_var;
    }
}

} // namespace nevo
