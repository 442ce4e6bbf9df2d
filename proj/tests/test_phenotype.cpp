#include "nevo/phenotype.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <vector>

#include "nevo/genome.hpp"
#include "nevo/rng.hpp"

using namespace nevo;

namespace {

NodeGene node(int id, NodeKind k, double depth, int sx, int sy) {
    NodeGene n;
    n.innovation_id = id;
    n.kind = k;
    n.depth = depth;
    n.size_x = sx;
    n.size_y = sy;
    return n;
}

EdgeGene conv(const Genome& g, int id, int a, int b) {
    const NodeGene* in = g.find_node(a);
    const NodeGene* out = g.find_node(b);
    EdgeGene e;
    e.innovation_id = id;
    e.in_node = a;
    e.out_node = b;
    e.kind = EdgeKind::convolutional;
    auto [fx, fy] = conv_filter_dims({in->size_x, in->size_y},
                                     {out->size_x, out->size_y});
    e.filter_x = fx;
    e.filter_y = fy;
    e.weights.assign(static_cast<std::size_t>(fx) * fy, 0.0);
    return e;
}

EdgeGene pool(int id, int a, int b, double scale) {
    EdgeGene e;
    e.innovation_id = id;
    e.in_node = a;
    e.out_node = b;
    e.kind = EdgeKind::pooling;
    e.scale = scale;
    return e;
}

// input (sx x sy) -> hidden -> both outputs; hidden fed by conv or pool.
Genome chain_genome(int in_sx, int in_sy, int hid_sx, int hid_sy,
                    EdgeKind hidden_feed) {
    Genome g;
    g.insert_node(node(0, NodeKind::input, 0.0, in_sx, in_sy));
    g.insert_node(node(1, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(2, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(9, NodeKind::hidden, 0.5, hid_sx, hid_sy));
    if (hidden_feed == EdgeKind::convolutional) {
        g.insert_edge(conv(g, 0, 0, 9));
    } else {
        g.insert_edge(pool(0, 0, 9, 1.0));
    }
    g.insert_edge(conv(g, 1, 9, 1));
    g.insert_edge(conv(g, 2, 9, 2));
    return g;
}

// Two hidden layers with a conv between them plus a pooling side branch and
// a direct input->output edge; three classes.
Genome diamond_genome() {
    Genome g;
    g.insert_node(node(0, NodeKind::input, 0.0, 6, 6));
    g.insert_node(node(1, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(2, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(3, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(10, NodeKind::hidden, 0.4, 4, 4));
    g.insert_node(node(11, NodeKind::hidden, 0.6, 3, 3));
    g.insert_edge(conv(g, 0, 0, 10));
    g.insert_edge(pool(1, 0, 11, 1.1));
    g.insert_edge(conv(g, 2, 10, 11));
    g.insert_edge(conv(g, 3, 10, 1));
    g.insert_edge(conv(g, 4, 11, 2));
    g.insert_edge(conv(g, 5, 0, 3));
    return g;
}

// input 8x8 -> conv 5x5 -> pool 3x3 -> conv 2x2 -> two outputs.
Genome deep_genome() {
    Genome g;
    g.insert_node(node(0, NodeKind::input, 0.0, 8, 8));
    g.insert_node(node(1, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(2, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(20, NodeKind::hidden, 0.25, 5, 5));
    g.insert_node(node(21, NodeKind::hidden, 0.5, 3, 3));
    g.insert_node(node(22, NodeKind::hidden, 0.75, 2, 2));
    g.insert_edge(conv(g, 0, 0, 20));
    g.insert_edge(pool(1, 20, 21, 0.9));
    g.insert_edge(conv(g, 2, 21, 22));
    g.insert_edge(conv(g, 3, 22, 1));
    g.insert_edge(conv(g, 4, 22, 2));
    return g;
}

// Downscale then upscale so the scatter kernels participate.
Genome upscale_genome() {
    Genome g;
    g.insert_node(node(0, NodeKind::input, 0.0, 6, 6));
    g.insert_node(node(1, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(2, NodeKind::output, 1.0, 1, 1));
    g.insert_node(node(30, NodeKind::hidden, 0.3, 2, 2));
    g.insert_node(node(31, NodeKind::hidden, 0.6, 4, 4));
    g.insert_edge(conv(g, 0, 0, 30));
    g.insert_edge(conv(g, 1, 30, 31));   // 2x2 -> 4x4 upscales
    g.insert_edge(conv(g, 2, 31, 1));
    g.insert_edge(conv(g, 3, 31, 2));
    return g;
}

std::vector<double> random_images(Rng& rng, int batch, int sx, int sy) {
    std::vector<double> v(static_cast<std::size_t>(batch) * sy * sx);
    for (double& x : v) x = rng.uniform(0.0, 1.0);
    return v;
}

void randomize_params(Phenotype& ph, Rng& rng) {
    auto p = ph.params();
    for (double& x : p) x = rng.uniform(-0.9, 0.9);
    for (std::size_t i = ph.decayed_count(); i < p.size(); i += 2) {
        p[i] = rng.uniform(0.6, 1.4);   // keep gammas away from zero
    }
}

double mean_ce(Phenotype& ph, const std::vector<double>& img, int batch,
               const std::vector<int>& labels) {
    ph.forward(img.data(), batch, true);
    return ph.total_cross_entropy(labels.data()) / batch;
}

void gradcheck(const Genome& g, std::uint64_t seed, int batch) {
    ASSERT_EQ(structural_fault(g), std::nullopt);
    NetConfig cfg;
    cfg.freeze_pooling = true;
    Phenotype ph(g, cfg, seed);
    Rng rng(seed * 31 + 7);
    randomize_params(ph, rng);
    const auto img = random_images(rng, batch, ph.input_x(), ph.input_y());
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int& l : labels) l = rng.uniform_int(ph.num_classes());

    ph.forward(img.data(), batch, true);
    ph.backward(labels.data());
    const std::vector<double> grad(ph.grads().begin(), ph.grads().end());

    auto p = ph.params();
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double save = p[i];
        p[i] = save + h;
        const double up = mean_ce(ph, img, batch, labels);
        p[i] = save - h;
        const double down = mean_ce(ph, img, batch, labels);
        p[i] = save;
        const double fd = (up - down) / (2.0 * h);
        const double tol = 1e-8 + 1e-5 * (std::abs(fd) + std::abs(grad[i]));
        ASSERT_NEAR(grad[i], fd, tol) << "param " << i << " of " << p.size();
    }
}

double ref_relu(double z) {
    if (z < 0.0) return 0.1 * z;
    if (z > 5.5) return 5.5 + 0.1 * (z - 5.5);
    return z;
}

} // namespace

TEST(MinimalForward, LogitsAreFilterDotProducts) {
    Genome g = minimal_genome(3, 3, 2);
    for (int i = 0; i < 9; ++i) {
        g.find_edge(0)->weights[static_cast<std::size_t>(i)] = (i + 1) / 10.0;
        g.find_edge(1)->weights[static_cast<std::size_t>(i)] =
            (i % 2 == 0 ? 1.0 : -1.0) * 0.2;
    }
    Phenotype ph(g, NetConfig{}, 1);
    Rng rng(42);
    const auto img = random_images(rng, 2, 3, 3);
    ph.forward(img.data(), 2, false);
    for (int s = 0; s < 2; ++s) {
        double l0 = 0.0, l1 = 0.0;
        for (int i = 0; i < 9; ++i) {
            l0 += img[static_cast<std::size_t>(s) * 9 + i] * ((i + 1) / 10.0);
            l1 += img[static_cast<std::size_t>(s) * 9 + i] *
                  ((i % 2 == 0 ? 1.0 : -1.0) * 0.2);
        }
        EXPECT_DOUBLE_EQ(ph.logit(s, 0), l0);
        EXPECT_DOUBLE_EQ(ph.logit(s, 1), l1);
        const double m = std::max(l0, l1);
        const double z = std::exp(l0 - m) + std::exp(l1 - m);
        EXPECT_NEAR(ph.probability(s, 0), std::exp(l0 - m) / z, 1e-15);
        EXPECT_NEAR(ph.probability(s, 1), std::exp(l1 - m) / z, 1e-15);
        EXPECT_EQ(ph.predict(s), l0 >= l1 ? 0 : 1);
    }
    const std::vector<int> labels{0, 1};
    double want = 0.0;
    for (int s = 0; s < 2; ++s) want -= std::log(ph.probability(s, labels[s]));
    EXPECT_NEAR(ph.total_cross_entropy(labels.data()), want, 1e-12);
}

TEST(MinimalForward, HandDerivativeOfSingleSample) {
    Genome g = minimal_genome(2, 2, 2);
    g.find_edge(0)->weights = {0.3, -0.2, 0.5, 0.1};
    g.find_edge(1)->weights = {-0.4, 0.6, 0.0, 0.2};
    Phenotype ph(g, NetConfig{}, 1);
    const std::vector<double> img{0.9, 0.1, 0.4, 0.7};
    ph.forward(img.data(), 1, true);
    const std::vector<int> labels{1};
    ph.backward(labels.data());
    // d logit_c = p_c - onehot_c (batch of one); d w_c[i] = d logit_c * x[i].
    const double p0 = ph.probability(0, 0);
    const double p1 = ph.probability(0, 1);
    auto grads = ph.grads();
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(grads[static_cast<std::size_t>(i)], p0 * img[static_cast<std::size_t>(i)], 1e-14);
        EXPECT_NEAR(grads[static_cast<std::size_t>(4 + i)],
                    (p1 - 1.0) * img[static_cast<std::size_t>(i)], 1e-14);
    }
}

TEST(Gradcheck, MinimalGenome) {
    gradcheck(minimal_genome(4, 4, 3), 11, 8);
}

TEST(Gradcheck, ConvChainWithBatchNorm) {
    gradcheck(chain_genome(6, 6, 3, 3, EdgeKind::convolutional), 12, 5);
}

TEST(Gradcheck, PoolChain) {
    gradcheck(chain_genome(7, 7, 3, 3, EdgeKind::pooling), 13, 5);
}

TEST(Gradcheck, DiamondMixedEdges) {
    gradcheck(diamond_genome(), 14, 5);
}

TEST(Gradcheck, DeepChainWithMidPool) {
    gradcheck(deep_genome(), 15, 5);
}

TEST(Gradcheck, UpscalingConvPath) {
    gradcheck(upscale_genome(), 16, 5);
}

TEST(BatchNorm, RunningStatUpdateRule) {
    Genome g = chain_genome(2, 2, 1, 1, EdgeKind::convolutional);
    g.find_edge(0)->weights = {0.5, -0.25, 1.0, 0.75};
    g.find_edge(1)->weights = {1.0};
    g.find_edge(2)->weights = {-1.0};
    Phenotype ph(g, NetConfig{}, 1);
    const std::vector<double> img{
        0.2, 0.4, 0.6, 0.8,   //
        0.9, 0.1, 0.3, 0.5,   //
        0.0, 1.0, 0.5, 0.25,  //
    };
    const double w[4] = {0.5, -0.25, 1.0, 0.75};
    double s[3];
    for (int i = 0; i < 3; ++i) {
        s[i] = 0.0;
        for (int j = 0; j < 4; ++j) s[i] += img[static_cast<std::size_t>(i) * 4 + j] * w[j];
    }
    const double mu = (s[0] + s[1] + s[2]) / 3.0;
    double var = 0.0;
    for (double x : s) var += (x - mu) * (x - mu);
    var /= 3.0;

    ph.forward(img.data(), 3, true);
    Genome snap = g;
    ph.write_back(snap);
    const NodeGene* h = snap.find_node(9);
    EXPECT_NEAR(h->bn_running_mean, 0.1 * mu, 1e-14);
    EXPECT_NEAR(h->bn_running_var, 0.9 * 1.0 + 0.1 * var, 1e-14);

    ph.forward(img.data(), 3, true);
    ph.write_back(snap);
    h = snap.find_node(9);
    EXPECT_NEAR(h->bn_running_mean, 0.9 * (0.1 * mu) + 0.1 * mu, 1e-14);
    EXPECT_NEAR(h->bn_running_var, 0.9 * (0.9 + 0.1 * var) + 0.1 * var, 1e-14);
}

TEST(BatchNorm, InferenceUsesRunningStatsAndBoundedRelu) {
    Genome g = chain_genome(2, 2, 1, 1, EdgeKind::convolutional);
    // Large weights so one sample lands above the relu cap, one below zero.
    g.find_edge(0)->weights = {4.0, 4.0, 4.0, 4.0};
    g.find_edge(1)->weights = {1.0};
    g.find_edge(2)->weights = {-0.5};
    Phenotype ph(g, NetConfig{}, 1);
    // Fresh genome: running mean 0, running var 1.
    const std::vector<double> img{
        0.5, 0.5, 0.5, 0.5,      // sum 8 -> above the 5.5 cap
        -0.1, -0.1, -0.1, -0.1,  // sum -1.6 -> leak region
    };
    ph.forward(img.data(), 2, false);
    for (int s = 0; s < 2; ++s) {
        double pre = 0.0;
        for (int j = 0; j < 4; ++j) pre += img[static_cast<std::size_t>(s) * 4 + j] * 4.0;
        const double zval = pre / std::sqrt(1.0 + 1e-5);
        const double act = ref_relu(zval);
        EXPECT_NEAR(ph.logit(s, 0), act, 1e-12) << "sample " << s;
        EXPECT_NEAR(ph.logit(s, 1), -0.5 * act, 1e-12) << "sample " << s;
    }
}

TEST(Pooling, InferenceDeterministicTrainingVaries) {
    Genome g = chain_genome(7, 7, 3, 3, EdgeKind::pooling);
    Phenotype ph(g, NetConfig{}, 77);
    Rng rng(3);
    randomize_params(ph, rng);
    std::vector<double> img(49);
    for (int i = 0; i < 49; ++i) img[static_cast<std::size_t>(i)] = i / 49.0;

    ph.forward(img.data(), 1, false);
    const double first = ph.logit(0, 0);
    ph.forward(img.data(), 1, false);
    EXPECT_DOUBLE_EQ(ph.logit(0, 0), first);

    std::set<double> seen;
    for (int i = 0; i < 12; ++i) {
        ph.forward(img.data(), 1, true);
        seen.insert(ph.logit(0, 0));
    }
    EXPECT_GT(seen.size(), 1u) << "training passes should reshuffle partitions";
}

TEST(Pooling, FrozenPartitionsGiveRepeatableTrainingPasses) {
    Genome g = chain_genome(7, 7, 3, 3, EdgeKind::pooling);
    NetConfig cfg;
    cfg.freeze_pooling = true;
    Phenotype ph(g, cfg, 123);
    Rng rng(4);
    randomize_params(ph, rng);
    std::vector<double> img(49);
    for (int i = 0; i < 49; ++i) img[static_cast<std::size_t>(i)] = (48 - i) / 21.0;
    ph.forward(img.data(), 1, true);
    const double first = ph.logit(0, 0);
    for (int i = 0; i < 5; ++i) {
        ph.forward(img.data(), 1, true);
        EXPECT_DOUBLE_EQ(ph.logit(0, 0), first);
    }
}

TEST(WriteBack, RoundTripReproducesInferenceExactly) {
    Genome g = diamond_genome();
    Phenotype ph(g, NetConfig{}, 5);
    Rng rng(6);
    randomize_params(ph, rng);
    const auto img = random_images(rng, 3, 6, 6);
    ph.forward(img.data(), 3, true);   // moves the running statistics
    Genome snap = g;
    ph.write_back(snap);
    Phenotype ph2(snap, NetConfig{}, 5);
    ph.forward(img.data(), 3, false);
    ph2.forward(img.data(), 3, false);
    for (int s = 0; s < 3; ++s) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_DOUBLE_EQ(ph.logit(s, c), ph2.logit(s, c))
                << "s=" << s << " c=" << c;
        }
    }
}

TEST(Divergence, NonFiniteLogitsAreFlagged) {
    Genome g = minimal_genome(2, 2, 2);
    Phenotype ph(g, NetConfig{}, 1);
    ph.params()[0] = 1e308;
    ph.params()[1] = 1e308;
    const std::vector<double> img{1.0, 1.0, 1.0, 1.0};
    ph.forward(img.data(), 1, true);
    EXPECT_FALSE(ph.finite());
    const std::vector<int> labels{0};
    EXPECT_TRUE(std::isinf(ph.total_cross_entropy(labels.data())));
    EXPECT_TRUE(std::isinf(ph.backward(labels.data())));
    for (double gr : ph.grads()) EXPECT_EQ(gr, 0.0);
}

TEST(DanglingHidden, ContributesNothing) {
    Genome g = minimal_genome(3, 3, 2);
    g.find_edge(0)->weights.assign(9, 0.5);
    g.find_edge(1)->weights.assign(9, -0.5);
    g.insert_node(node(9, NodeKind::hidden, 0.5, 2, 2));
    EdgeGene dead = conv(g, 7, 0, 9);
    dead.enabled = false;
    g.insert_edge(dead);
    EdgeGene tap = conv(g, 8, 9, 1);
    tap.weights.assign(4, 100.0);   // would dominate if the node carried signal
    g.insert_edge(tap);
    ASSERT_EQ(structural_fault(g), std::nullopt);
    ASSERT_TRUE(reachable(g));

    Phenotype ph(g, NetConfig{}, 1);
    Rng rng(8);
    const auto img = random_images(rng, 2, 3, 3);
    ph.forward(img.data(), 2, true);
    EXPECT_TRUE(ph.finite());
    for (int s = 0; s < 2; ++s) {
        double l0 = 0.0;
        for (int i = 0; i < 9; ++i) l0 += img[static_cast<std::size_t>(s) * 9 + i] * 0.5;
        // Hidden node sees a zero sum, normalizes to zero, rectifies to
        // zero: the 100-weight tap is inert.
        EXPECT_NEAR(ph.logit(s, 0), l0, 1e-12);
    }
}

TEST(Errors, FilterShapeMismatchThrows) {
    Genome g = minimal_genome(3, 3, 2);
    g.find_edge(0)->weights.resize(5);
    EXPECT_THROW(Phenotype(g, NetConfig{}, 1), std::runtime_error);
}

TEST(Errors, BackwardBeforeTrainingForwardThrows) {
    Genome g = minimal_genome(2, 2, 2);
    Phenotype ph(g, NetConfig{}, 1);
    const std::vector<double> img{0.1, 0.2, 0.3, 0.4};
    ph.forward(img.data(), 1, false);
    const std::vector<int> labels{0};
    EXPECT_THROW(ph.backward(labels.data()), std::runtime_error);
}
