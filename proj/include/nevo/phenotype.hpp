#ifndef NEVO_PHENOTYPE_HPP
#define NEVO_PHENOTYPE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "nevo/genome.hpp"
#include "nevo/rng.hpp"

namespace nevo {

// Forward-pass and batch-norm constants. Training and evolution settings
// live in TrainConfig / SearchConfig; this is only what the compiled network
// itself needs.
struct NetConfig {
    double bn_alpha = 0.1;     // running-stat update rate
    double bn_epsilon = 1e-5;
    double relu_max = 5.5;     // bound of the leaky rectifier
    double relu_leak = 0.1;
    // Draw every pooling partition once at construction and keep it for all
    // passes (gradient checks need the network to be a fixed function).
    bool freeze_pooling = false;
};

// A genome compiled into an executable network.
//
// Forward semantics per node, in evaluation order: incoming edges accumulate
// into a pre-activation sum; hidden nodes apply batch norm (batch statistics
// while training, running statistics otherwise) then the bounded leaky
// rectifier; output nodes pass the raw sum through as a logit. Class
// probabilities come from one softmax over all output nodes jointly.
//
// Training-mode forwards redraw every pooling partition (per edge, in plan
// order, from the phenotype's own generator); inference uses the canonical
// near-equal partition so repeated evaluations of the same network agree.
//
// backward() computes gradients of the MEAN cross entropy of the last
// training-mode forward; reported losses are TOTAL cross entropy.
class Phenotype {
  public:
    Phenotype(const Genome& g, const NetConfig& cfg, std::uint64_t pooling_seed);

    int num_classes() const { return static_cast<int>(outputs_.size()); }
    int input_x() const { return nodes_[0].sx; }
    int input_y() const { return nodes_[0].sy; }

    // images: batch sample-major rasters of input_y() x input_x() doubles.
    void forward(const double* images, int batch, bool training);

    // Gradients of mean cross entropy into grads(); returns the total cross
    // entropy. Requires the last forward to have been in training mode.
    double backward(const int* labels);

    // Readouts over the last forward.
    double total_cross_entropy(const int* labels) const;
    int correct_predictions(const int* labels) const;
    int predict(int sample) const;
    double logit(int sample, int cls) const;
    double probability(int sample, int cls) const;
    bool finite() const { return finite_; }

    // Flat parameter/gradient views. The first decayed_count() entries are
    // conv weights and pooling scales (weight decay applies); the remainder
    // is batch-norm gamma/beta (momentum only).
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::span<const double> grads() const { return grads_; }
    std::size_t decayed_count() const { return decayed_count_; }

    // Copy weights, scales, and batch-norm state back onto matching genes.
    void write_back(Genome& g) const;

  private:
    struct Edge {
        int gene_id = -1;
        int in_slot = -1;
        int out_slot = -1;
        EdgeKind kind = EdgeKind::convolutional;
        int fx = 0, fy = 0;
        std::size_t param_off = 0;
        std::vector<int> part_x, part_y;       // partitions of the last pass
        std::vector<int> canon_x, canon_y;     // inference partitions
        std::vector<int> argmax;
    };

    struct Node {
        int gene_id = -1;
        NodeKind kind = NodeKind::hidden;
        int sx = 1, sy = 1;
        std::size_t bn_off = 0;                // gamma at bn_off, beta next
        double running_mean = 0.0;
        double running_var = 1.0;
        double mean = 0.0, inv_std = 1.0;      // stats used by the last pass
        std::vector<int> in_edges;             // indices into edges_
        std::vector<double> sum, xhat, z, act, d_act, d_sum;
    };

    std::size_t elems(const Node& n) const {
        return static_cast<std::size_t>(batch_) * n.sy * n.sx;
    }
    void ensure_capacity(int batch);
    void run_edge_forward(Edge& e, bool training);

    NetConfig cfg_;
    Rng rng_;
    std::vector<Node> nodes_;                  // evaluation order; [0] is input
    std::vector<Edge> edges_;                  // plan order
    std::vector<int> outputs_;                 // node slots, class order
    std::vector<double> params_, grads_;
    std::size_t decayed_count_ = 0;
    int batch_ = 0;
    int capacity_ = 0;
    bool trained_forward_ = false;
    bool finite_ = true;
    std::vector<double> logits_, probs_;       // batch x num_classes
};

} // namespace nevo

#endif
