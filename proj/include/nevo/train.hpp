#ifndef NEVO_TRAIN_HPP
#define NEVO_TRAIN_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "nevo/genome.hpp"
#include "nevo/phenotype.hpp"
#include "nevo/rng.hpp"

namespace nevo {

// Borrowed view of a labeled image set, sample-major rasters.
struct DataView {
    const double* images = nullptr;   // count * size_y * size_x
    const int* labels = nullptr;      // count
    int count = 0;
    int size_x = 0;
    int size_y = 0;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 50;
    double momentum = 0.5;
    double momentum_delta = 0.95;       // mu' = mu_max - (mu_max - mu) * delta
    double momentum_max = 0.99;
    double learning_rate = 0.0125;
    double learning_rate_delta = 0.95;  // eta' = max(eta * delta, eta_min)
    double learning_rate_min = 1e-4;
    double weight_decay = 0.0005;       // same multiplicative decay as eta
    double weight_decay_delta = 0.95;
    double weight_decay_min = 1e-5;
    bool standard_he = false;           // variance 2/n instead of sqrt(2/n)
    NetConfig net;
};

// Per-epoch values of the scheduled optimizer knobs.
struct Schedule {
    double momentum;
    double learning_rate;
    double weight_decay;

    explicit Schedule(const TrainConfig& c)
        : momentum(c.momentum),
          learning_rate(c.learning_rate),
          weight_decay(c.weight_decay) {}

    void advance(const TrainConfig& c);
};

struct TrainResult {
    std::vector<double> epoch_train_ce;   // mean cross entropy per epoch
    double val_total_ce = std::numeric_limits<double>::infinity();
    double val_accuracy = 0.0;
    bool diverged = false;
};

struct EvalResult {
    double total_ce = std::numeric_limits<double>::infinity();
    int correct = 0;
    int count = 0;
    double accuracy() const { return count > 0 ? static_cast<double>(correct) / count : 0.0; }
};

// Gaussian filter init with variance sqrt(2/n) (or 2/n when `standard`),
// n = enabled incoming weight count of the edge's destination node. Pooling
// scales become 1 and batch-norm state resets on every node.
void he_initialize(Genome& g, Rng& rng, bool standard = false);

// Weight inheritance for a fresh candidate: genes whose innovation id
// appears in a parent (first match wins; pass the fitter parent first) keep
// the parent values — reshaped conv filters keep the overlapping top-left
// block — and everything else is initialized as he_initialize would.
void epigenetic_initialize(Genome& child,
                           std::span<const Genome* const> parents, Rng& rng,
                           bool standard = false);

// One Nesterov momentum step; velocity must persist across calls. Weight
// decay multiplies the first decayed_count parameters by (1 - lambda) after
// the update.
void nesterov_step(std::span<double> params, std::span<const double> grads,
                   std::span<double> velocity, double eta, double mu,
                   double lambda, std::size_t decayed_count);

// Minibatch SGD on the genome's weights; writes the trained weights and
// batch-norm state back and sets g.fitness to the validation total cross
// entropy. When training diverges (non-finite loss or weights) the result
// carries diverged=true and the genome is left untouched.
TrainResult train_genome(Genome& g, const DataView& train, const DataView& val,
                         const TrainConfig& cfg, std::uint64_t seed);

// Inference-mode total cross entropy and accuracy over a whole set.
EvalResult evaluate_genome(const Genome& g, const DataView& data,
                           const NetConfig& net, int batch_size);
EvalResult evaluate_phenotype(Phenotype& ph, const DataView& data,
                              int batch_size);

} // namespace nevo

#endif
