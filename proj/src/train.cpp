#include "nevo/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>

namespace nevo {

namespace {

// Enabled incoming weight count per destination node.
std::map<int, long> fan_in(const Genome& g) {
    std::map<int, long> fan;
    for (const EdgeGene& e : g.edges) {
        if (e.enabled) fan[e.out_node] += static_cast<long>(e.weight_count());
    }
    return fan;
}

double he_stddev(long n, bool standard) {
    const double variance = standard ? 2.0 / static_cast<double>(n)
                                     : std::sqrt(2.0 / static_cast<double>(n));
    return std::sqrt(variance);
}

long dest_fan(const std::map<int, long>& fan, int node_id) {
    const auto it = fan.find(node_id);
    return std::max(1L, it == fan.end() ? 0L : it->second);
}

void check_view(const DataView& d, const Phenotype& ph, const char* what) {
    if (d.size_x != ph.input_x() || d.size_y != ph.input_y()) {
        throw std::runtime_error(std::string(what) +
                                 " image size does not match the genome input");
    }
}

} // namespace

void Schedule::advance(const TrainConfig& c) {
    momentum = c.momentum_max - (c.momentum_max - momentum) * c.momentum_delta;
    learning_rate = std::max(learning_rate * c.learning_rate_delta,
                             c.learning_rate_min);
    weight_decay = std::max(weight_decay * c.weight_decay_delta,
                            c.weight_decay_min);
}

void he_initialize(Genome& g, Rng& rng, bool standard) {
    const auto fan = fan_in(g);
    for (EdgeGene& e : g.edges) {
        if (e.kind == EdgeKind::convolutional) {
            const double sd = he_stddev(dest_fan(fan, e.out_node), standard);
            for (double& w : e.weights) w = rng.gaussian(0.0, sd);
        } else {
            e.scale = 1.0;
        }
    }
    for (NodeGene& n : g.nodes) {
        n.bn_gamma = 1.0;
        n.bn_beta = 0.0;
        n.bn_running_mean = 0.0;
        n.bn_running_var = 1.0;
    }
}

void epigenetic_initialize(Genome& child,
                           std::span<const Genome* const> parents, Rng& rng,
                           bool standard) {
    const auto fan = fan_in(child);
    auto parent_edge = [&parents](int id) -> const EdgeGene* {
        for (const Genome* p : parents) {
            if (const EdgeGene* e = p->find_edge(id)) return e;
        }
        return nullptr;
    };
    auto parent_node = [&parents](int id) -> const NodeGene* {
        for (const Genome* p : parents) {
            if (const NodeGene* n = p->find_node(id)) return n;
        }
        return nullptr;
    };

    for (EdgeGene& e : child.edges) {
        const EdgeGene* src = parent_edge(e.innovation_id);
        if (e.kind == EdgeKind::pooling) {
            e.scale = (src != nullptr && src->kind == EdgeKind::pooling)
                          ? src->scale
                          : 1.0;
            continue;
        }
        const double sd = he_stddev(dest_fan(fan, e.out_node), standard);
        if (src != nullptr && src->kind == EdgeKind::convolutional) {
            // Keep the overlapping top-left block, draw the rest fresh.
            for (int wy = 0; wy < e.filter_y; ++wy) {
                for (int wx = 0; wx < e.filter_x; ++wx) {
                    double& w = e.weights[static_cast<std::size_t>(wy) *
                                              e.filter_x +
                                          wx];
                    if (wy < src->filter_y && wx < src->filter_x) {
                        w = src->weights[static_cast<std::size_t>(wy) *
                                             src->filter_x +
                                         wx];
                    } else {
                        w = rng.gaussian(0.0, sd);
                    }
                }
            }
        } else {
            for (double& w : e.weights) w = rng.gaussian(0.0, sd);
        }
    }

    for (NodeGene& n : child.nodes) {
        if (const NodeGene* src = parent_node(n.innovation_id)) {
            n.bn_gamma = src->bn_gamma;
            n.bn_beta = src->bn_beta;
            n.bn_running_mean = src->bn_running_mean;
            n.bn_running_var = src->bn_running_var;
        } else {
            n.bn_gamma = 1.0;
            n.bn_beta = 0.0;
            n.bn_running_mean = 0.0;
            n.bn_running_var = 1.0;
        }
    }
}

void nesterov_step(std::span<double> params, std::span<const double> grads,
                   std::span<double> velocity, double eta, double mu,
                   double lambda, std::size_t decayed_count) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double v_prev = velocity[i];
        const double v_next = mu * v_prev - eta * grads[i];
        velocity[i] = v_next;
        params[i] += -mu * v_prev + (1.0 + mu) * v_next;
    }
    const double keep = 1.0 - lambda;
    for (std::size_t i = 0; i < decayed_count; ++i) params[i] *= keep;
}

TrainResult train_genome(Genome& g, const DataView& train, const DataView& val,
                         const TrainConfig& cfg, std::uint64_t seed) {
    TrainResult res;
    Phenotype ph(g, cfg.net, derive_seed(seed, 1));
    check_view(train, ph, "train");
    check_view(val, ph, "validation");

    Rng shuffle_rng(derive_seed(seed, 2));
    auto params = ph.params();
    std::vector<double> velocity(params.size(), 0.0);
    Schedule sched(cfg);

    const std::size_t sample_elems =
        static_cast<std::size_t>(train.size_y) * train.size_x;
    const int batches =
        cfg.batch_size > 0 ? train.count / cfg.batch_size : 0;
    std::vector<double> batch_images(
        static_cast<std::size_t>(cfg.batch_size) * sample_elems);
    std::vector<int> batch_labels(
        static_cast<std::size_t>(std::max(cfg.batch_size, 0)));
    std::vector<int> order(static_cast<std::size_t>(train.count));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = train.count - 1; i > 0; --i) {
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(i + 1))]);
        }
        double epoch_ce = 0.0;
        long seen = 0;
        for (int b = 0; b < batches; ++b) {
            for (int k = 0; k < cfg.batch_size; ++k) {
                const int idx = order[static_cast<std::size_t>(b) * cfg.batch_size + k];
                std::copy_n(train.images + idx * sample_elems, sample_elems,
                            batch_images.begin() +
                                static_cast<std::ptrdiff_t>(k * sample_elems));
                batch_labels[static_cast<std::size_t>(k)] = train.labels[idx];
            }
            ph.forward(batch_images.data(), cfg.batch_size, true);
            const double total = ph.backward(batch_labels.data());
            if (!std::isfinite(total)) {
                res.diverged = true;
                return res;
            }
            nesterov_step(params, ph.grads(), velocity, sched.learning_rate,
                          sched.momentum, sched.weight_decay,
                          ph.decayed_count());
            epoch_ce += total;
            seen += cfg.batch_size;
        }
        res.epoch_train_ce.push_back(seen > 0 ? epoch_ce / static_cast<double>(seen)
                                              : 0.0);
        sched.advance(cfg);
    }

    for (double p : params) {
        if (!std::isfinite(p)) {
            res.diverged = true;
            return res;
        }
    }

    const EvalResult ev = evaluate_phenotype(ph, val, cfg.batch_size);
    if (!std::isfinite(ev.total_ce)) {
        res.diverged = true;
        return res;
    }
    ph.write_back(g);
    g.fitness = ev.total_ce;
    res.val_total_ce = ev.total_ce;
    res.val_accuracy = ev.accuracy();
    return res;
}

EvalResult evaluate_phenotype(Phenotype& ph, const DataView& data,
                              int batch_size) {
    check_view(data, ph, "evaluation");
    EvalResult r;
    r.total_ce = 0.0;
    r.count = data.count;
    const std::size_t sample_elems =
        static_cast<std::size_t>(data.size_y) * data.size_x;
    const int bs = std::max(1, batch_size);
    for (int start = 0; start < data.count; start += bs) {
        const int b = std::min(bs, data.count - start);
        ph.forward(data.images + static_cast<std::size_t>(start) * sample_elems,
                   b, false);
        r.total_ce += ph.total_cross_entropy(data.labels + start);
        r.correct += ph.correct_predictions(data.labels + start);
    }
    return r;
}

EvalResult evaluate_genome(const Genome& g, const DataView& data,
                           const NetConfig& net, int batch_size) {
    Phenotype ph(g, net, 0);
    return evaluate_phenotype(ph, data, batch_size);
}

} // namespace nevo
