#include "nevo/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "nevo/genome.hpp"
#include "nevo/rng.hpp"

using namespace nevo;

namespace {

struct TinySet {
    std::vector<double> images;
    std::vector<int> labels;
    int sx = 4, sy = 4;

    DataView view() const {
        return {images.data(), labels.data(), static_cast<int>(labels.size()),
                sx, sy};
    }
};

// Class 0 is bright on top, class 1 bright on the bottom, plus noise.
TinySet make_tiny(int n, std::uint64_t seed) {
    TinySet t;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) {
                const bool bright = cls == 0 ? y < 2 : y >= 2;
                t.images.push_back((bright ? 0.75 : 0.25) +
                                   rng.uniform(-0.2, 0.2));
            }
        }
        t.labels.push_back(cls);
    }
    return t;
}

NodeGene node(int id, NodeKind k, double depth, int sx, int sy) {
    NodeGene n;
    n.innovation_id = id;
    n.kind = k;
    n.depth = depth;
    n.size_x = sx;
    n.size_y = sy;
    return n;
}

// input -> hidden (pool) -> two outputs, for initializer checks.
Genome pool_genome() {
    Genome g;
    g.insert_node(node(0, NodeKind::input, 0.0, 4, 4));
    g.insert_node(node(1, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(2, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(9, NodeKind::hidden, 0.5, 2, 2));
    EdgeGene p;
    p.innovation_id = 0;
    p.in_node = 0;
    p.out_node = 9;
    p.kind = EdgeKind::pooling;
    p.scale = 7.0;
    g.insert_edge(p);
    for (int c = 0; c < 2; ++c) {
        EdgeGene e;
        e.innovation_id = 1 + c;
        e.in_node = 9;
        e.out_node = 1 + c;
        e.kind = EdgeKind::convolutional;
        e.filter_x = 2;
        e.filter_y = 2;
        e.weights.assign(4, 0.5);
        g.insert_edge(e);
    }
    return g;
}

} // namespace

TEST(Nesterov, TwoStepHandOracle) {
    // f(w) = w^2 / 2, so grad = w; eta 0.1, mu 0.5 gives 0.85 then 0.6975.
    std::vector<double> w{1.0}, v{0.0};
    std::vector<double> g{1.0};
    nesterov_step(w, g, v, 0.1, 0.5, 0.0, 1);
    EXPECT_NEAR(w[0], 0.85, 1e-15);
    EXPECT_NEAR(v[0], -0.1, 1e-15);
    g[0] = w[0];
    nesterov_step(w, g, v, 0.1, 0.5, 0.0, 1);
    EXPECT_NEAR(w[0], 0.6975, 1e-15);
    EXPECT_NEAR(v[0], -0.135, 1e-15);
}

TEST(Nesterov, DecayOnlyTouchesDecayedPrefix) {
    std::vector<double> w{1.0, 1.0}, v{0.0, 0.0};
    const std::vector<double> g{0.0, 0.0};
    nesterov_step(w, g, v, 0.1, 0.9, 0.1, 1);
    EXPECT_DOUBLE_EQ(w[0], 0.9);
    EXPECT_DOUBLE_EQ(w[1], 1.0);
}

TEST(Schedule, AdvanceMatchesPinnedValues) {
    TrainConfig cfg;
    Schedule s(cfg);
    EXPECT_DOUBLE_EQ(s.momentum, 0.5);
    EXPECT_DOUBLE_EQ(s.learning_rate, 0.0125);
    EXPECT_DOUBLE_EQ(s.weight_decay, 0.0005);
    s.advance(cfg);
    EXPECT_NEAR(s.momentum, 0.5245, 1e-12);
    EXPECT_NEAR(s.learning_rate, 0.011875, 1e-12);
    EXPECT_NEAR(s.weight_decay, 0.000475, 1e-12);
}

TEST(Schedule, FloorsAndCapHold) {
    TrainConfig cfg;
    cfg.learning_rate = 1.05e-4;
    cfg.weight_decay = 1.02e-5;
    Schedule s(cfg);
    s.advance(cfg);
    EXPECT_DOUBLE_EQ(s.learning_rate, cfg.learning_rate_min);
    EXPECT_DOUBLE_EQ(s.weight_decay, cfg.weight_decay_min);
    double prev = s.momentum;
    for (int i = 0; i < 300; ++i) {
        s.advance(cfg);
        EXPECT_GE(s.momentum, prev);
        EXPECT_LE(s.momentum, cfg.momentum_max + 1e-12);
        prev = s.momentum;
    }
    EXPECT_NEAR(s.momentum, cfg.momentum_max, 1e-6);
}

TEST(HeInit, EmpiricalVarianceMatchesFourthRootRule) {
    Genome g = minimal_genome(28, 28, 10);
    Rng rng(35813);
    he_initialize(g, rng);
    std::vector<double> all;
    for (const EdgeGene& e : g.edges) {
        all.insert(all.end(), e.weights.begin(), e.weights.end());
    }
    ASSERT_EQ(all.size(), 7840u);
    double mean = 0.0;
    for (double w : all) mean += w;
    mean /= static_cast<double>(all.size());
    double var = 0.0;
    for (double w : all) var += (w - mean) * (w - mean);
    var /= static_cast<double>(all.size());
    const double want = std::sqrt(2.0 / 784.0);   // each output sees 784 weights
    EXPECT_NEAR(var / want, 1.0, 0.05);
    EXPECT_NEAR(mean, 0.0, 0.01);
}

TEST(HeInit, StandardSwitchUsesTwoOverN) {
    Genome g = minimal_genome(28, 28, 10);
    Rng rng(35813);
    he_initialize(g, rng, /*standard=*/true);
    double var = 0.0;
    std::size_t count = 0;
    for (const EdgeGene& e : g.edges) {
        for (double w : e.weights) {
            var += w * w;
            ++count;
        }
    }
    var /= static_cast<double>(count);
    EXPECT_NEAR(var / (2.0 / 784.0), 1.0, 0.05);
}

TEST(HeInit, ResetsScalesAndBatchNormState) {
    Genome g = pool_genome();
    g.find_node(9)->bn_gamma = 4.0;
    g.find_node(9)->bn_running_mean = 5.0;
    Rng rng(2);
    he_initialize(g, rng);
    EXPECT_DOUBLE_EQ(g.find_edge(0)->scale, 1.0);
    EXPECT_DOUBLE_EQ(g.find_node(9)->bn_gamma, 1.0);
    EXPECT_DOUBLE_EQ(g.find_node(9)->bn_beta, 0.0);
    EXPECT_DOUBLE_EQ(g.find_node(9)->bn_running_mean, 0.0);
    EXPECT_DOUBLE_EQ(g.find_node(9)->bn_running_var, 1.0);
}

TEST(Epigenetic, InheritedGenesCopyVerbatimFreshOnesDraw) {
    Genome parent = minimal_genome(3, 3, 2);
    Rng init_rng(3);
    he_initialize(parent, init_rng);
    parent.find_node(1)->bn_beta = 0.3;

    Genome child = parent;
    child.insert_node(node(9, NodeKind::hidden, 0.5, 2, 2));
    EdgeGene in_edge;
    in_edge.innovation_id = 7;
    in_edge.in_node = 0;
    in_edge.out_node = 9;
    in_edge.kind = EdgeKind::convolutional;
    in_edge.filter_x = 2;
    in_edge.filter_y = 2;
    in_edge.weights.assign(4, 0.0);
    child.insert_edge(in_edge);
    EdgeGene out_edge = in_edge;
    out_edge.innovation_id = 8;
    out_edge.in_node = 9;
    out_edge.out_node = 1;
    out_edge.weights.assign(4, 0.0);
    child.insert_edge(out_edge);

    const Genome* parents[] = {&parent};
    Rng rng(4);
    epigenetic_initialize(child, parents, rng);
    EXPECT_EQ(child.find_edge(0)->weights, parent.find_edge(0)->weights);
    EXPECT_EQ(child.find_edge(1)->weights, parent.find_edge(1)->weights);
    for (int id : {7, 8}) {
        for (double w : child.find_edge(id)->weights) EXPECT_NE(w, 0.0);
    }
    EXPECT_DOUBLE_EQ(child.find_node(1)->bn_beta, 0.3);    // copied
    EXPECT_DOUBLE_EQ(child.find_node(9)->bn_beta, 0.0);    // fresh defaults
    EXPECT_DOUBLE_EQ(child.find_node(9)->bn_gamma, 1.0);
}

TEST(Epigenetic, ReshapedFilterKeepsTopLeftBlock) {
    Genome parent = minimal_genome(4, 4, 2);
    for (int i = 0; i < 16; ++i) {
        parent.find_edge(0)->weights[static_cast<std::size_t>(i)] = 0.01 * (i + 1);
    }

    // Child grew its input to 5x5: same edge id, filter now 5x5.
    Genome child = parent;
    child.find_node(0)->size_x = 5;
    child.find_node(0)->size_y = 5;
    for (int id : {0, 1}) {
        EdgeGene* e = child.find_edge(id);
        e->filter_x = 5;
        e->filter_y = 5;
        e->weights.assign(25, 0.0);
    }
    const Genome* parents[] = {&parent};
    Rng rng(5);
    epigenetic_initialize(child, parents, rng);
    const EdgeGene* e = child.find_edge(0);
    for (int wy = 0; wy < 5; ++wy) {
        for (int wx = 0; wx < 5; ++wx) {
            const double got = e->weights[static_cast<std::size_t>(wy) * 5 + wx];
            if (wy < 4 && wx < 4) {
                EXPECT_DOUBLE_EQ(got, 0.01 * (wy * 4 + wx + 1));
            } else {
                EXPECT_NE(got, 0.0) << "border entries must be drawn fresh";
            }
        }
    }
}

TEST(Epigenetic, FirstParentWinsSharedGenes) {
    Genome a = minimal_genome(3, 3, 2);
    Genome b = minimal_genome(3, 3, 2);
    Rng ra(6), rb(7);
    he_initialize(a, ra);
    he_initialize(b, rb);
    ASSERT_NE(a.find_edge(0)->weights, b.find_edge(0)->weights);

    Genome child = b;
    const Genome* parents[] = {&a, &b};
    Rng rng(8);
    epigenetic_initialize(child, parents, rng);
    EXPECT_EQ(child.find_edge(0)->weights, a.find_edge(0)->weights);
    EXPECT_EQ(child.find_edge(1)->weights, a.find_edge(1)->weights);
}

TEST(Epigenetic, KindMismatchFallsBackToDefaults) {
    Genome parent = pool_genome();
    // Parent edge 1 is convolutional; make the child's edge 1 a pooling edge.
    Genome child = parent;
    EdgeGene* e = child.find_edge(1);
    e->kind = EdgeKind::pooling;
    e->filter_x = 0;
    e->filter_y = 0;
    e->weights.clear();
    e->scale = 9.9;
    const Genome* parents[] = {&parent};
    Rng rng(9);
    epigenetic_initialize(child, parents, rng);
    EXPECT_DOUBLE_EQ(child.find_edge(1)->scale, 1.0);
    // The still-pooling edge 0 keeps its parent scale.
    EXPECT_DOUBLE_EQ(child.find_edge(0)->scale, 7.0);
}

TEST(Train, LearnsTinySyntheticProblem) {
    const TinySet train_set = make_tiny(200, 100);
    const TinySet val_set = make_tiny(50, 200);
    Genome g = minimal_genome(4, 4, 2);
    Rng rng(11);
    he_initialize(g, rng);

    const EvalResult before =
        evaluate_genome(g, val_set.view(), NetConfig{}, 25);

    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 25;
    const TrainResult res = train_genome(g, train_set.view(), val_set.view(),
                                         cfg, 12345);
    EXPECT_FALSE(res.diverged);
    EXPECT_GE(res.val_accuracy, 0.9);
    EXPECT_LT(res.val_total_ce, before.total_ce);
    EXPECT_DOUBLE_EQ(g.fitness, res.val_total_ce);
    ASSERT_EQ(res.epoch_train_ce.size(), 5u);
    EXPECT_LT(res.epoch_train_ce.back(), res.epoch_train_ce.front());
}

TEST(Train, DeterministicGivenSeed) {
    const TinySet train_set = make_tiny(100, 300);
    const TinySet val_set = make_tiny(30, 400);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 20;

    Genome base = minimal_genome(4, 4, 2);
    Rng rng(21);
    he_initialize(base, rng);

    Genome g1 = base, g2 = base;
    const TrainResult r1 = train_genome(g1, train_set.view(), val_set.view(), cfg, 777);
    const TrainResult r2 = train_genome(g2, train_set.view(), val_set.view(), cfg, 777);
    EXPECT_EQ(r1.val_total_ce, r2.val_total_ce);
    EXPECT_EQ(serialize(g1), serialize(g2));

    Genome g3 = base;
    const TrainResult r3 = train_genome(g3, train_set.view(), val_set.view(), cfg, 778);
    EXPECT_NE(serialize(g1), serialize(g3)) << "different seed, same bytes";
    (void)r3;
}

TEST(Train, DivergenceLeavesGenomeUntouched) {
    const TinySet train_set = make_tiny(100, 500);
    const TinySet val_set = make_tiny(30, 600);
    Genome g = minimal_genome(4, 4, 2);
    g.find_edge(0)->weights.assign(16, 1e300);
    g.find_edge(1)->weights.assign(16, -1e300);
    const std::string before = serialize(g);

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 20;
    const TrainResult res = train_genome(g, train_set.view(), val_set.view(), cfg, 1);
    EXPECT_TRUE(res.diverged);
    EXPECT_TRUE(std::isinf(res.val_total_ce));
    EXPECT_EQ(serialize(g), before);
    EXPECT_FALSE(g.evaluated());
}

TEST(Train, NoFullBatchMeansNoUpdates) {
    const TinySet train_set = make_tiny(20, 700);
    const TinySet val_set = make_tiny(20, 800);
    Genome g = minimal_genome(4, 4, 2);
    Rng rng(31);
    he_initialize(g, rng);
    const std::vector<double> w_before = g.find_edge(0)->weights;

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 50;   // larger than the set: the ragged tail is dropped
    const TrainResult res = train_genome(g, train_set.view(), val_set.view(), cfg, 1);
    EXPECT_FALSE(res.diverged);
    EXPECT_EQ(g.find_edge(0)->weights, w_before);
    for (double ce : res.epoch_train_ce) EXPECT_EQ(ce, 0.0);
    EXPECT_TRUE(g.evaluated());
}

TEST(Evaluate, TotalsMatchHandComputation) {
    Genome g = minimal_genome(2, 2, 2);
    g.find_edge(0)->weights = {1.0, -1.0, 0.5, 0.0};
    g.find_edge(1)->weights = {-0.5, 0.5, 0.0, 1.0};
    const std::vector<double> images{
        0.2, 0.4, 0.6, 0.8,  //
        0.9, 0.1, 0.2, 0.3,  //
        0.5, 0.5, 0.5, 0.5,  //
    };
    const std::vector<int> labels{0, 1, 0};
    const DataView view{images.data(), labels.data(), 3, 2, 2};
    const EvalResult r = evaluate_genome(g, view, NetConfig{}, 2); // ragged tail

    double want_ce = 0.0;
    int want_correct = 0;
    for (int s = 0; s < 3; ++s) {
        double l0 = 0.0, l1 = 0.0;
        for (int i = 0; i < 4; ++i) {
            l0 += images[static_cast<std::size_t>(s) * 4 + i] *
                  g.find_edge(0)->weights[static_cast<std::size_t>(i)];
            l1 += images[static_cast<std::size_t>(s) * 4 + i] *
                  g.find_edge(1)->weights[static_cast<std::size_t>(i)];
        }
        const double m = std::max(l0, l1);
        const double zs = std::exp(l0 - m) + std::exp(l1 - m);
        const double p0 = std::exp(l0 - m) / zs;
        const double p = labels[static_cast<std::size_t>(s)] == 0 ? p0 : 1.0 - p0;
        want_ce -= std::log(p);
        const int pred = l0 >= l1 ? 0 : 1;
        want_correct += pred == labels[static_cast<std::size_t>(s)];
    }
    EXPECT_NEAR(r.total_ce, want_ce, 1e-12);
    EXPECT_EQ(r.correct, want_correct);
    EXPECT_EQ(r.count, 3);
}
