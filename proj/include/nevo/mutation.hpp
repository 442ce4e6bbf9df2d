#ifndef NEVO_MUTATION_HPP
#define NEVO_MUTATION_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nevo/genome.hpp"
#include "nevo/innovation.hpp"
#include "nevo/rng.hpp"

namespace nevo {

enum class Op {
    disable_edge,
    enable_edge,
    split_edge,
    add_edge,
    alter_edge_type,
    change_node_size,
    change_node_size_x,
    change_node_size_y,
    add_node,
    split_node,
    merge_node,
    disable_node,
    enable_node,
};

const char* op_tag(Op op);

enum class Axis { both, x, y };

// Outcome of applying a structural operator.
//   ok           - a candidate was produced (may still fail whole-genome checks)
//   inapplicable - the genome has no eligible target for this operator
//   discard      - the operator ran but produced a geometrically impossible
//                  result (e.g. a feature map shrunk below 1x1)
enum class OpOutcome { ok, inapplicable, discard };

struct OperatorConfig {
    bool node_ops_enabled = true;
    bool pooling_enabled = false;

    double crossover_rate = 0.2;
    // Probability of keeping a non-shared gene enabled when it comes from the
    // more fit / less fit parent respectively.
    double more_fit_rate = 0.8;
    double less_fit_rate = 0.4;

    std::vector<int> size_deltas = {-2, -1, 1, 2};

    // Relative selection weights; normalized over the enabled set at draw time.
    double w_disable_edge = 2.5;
    double w_enable_edge = 2.5;
    double w_split_edge = 3.0;
    double w_add_edge = 3.0;
    double w_alter_edge_type = 1.0;
    double w_change_node_size = 2.0;
    double w_change_node_size_x = 1.0;
    double w_change_node_size_y = 1.0;
    double w_add_node = 3.0;
    double w_split_node = 2.0;
    double w_merge_node = 2.0;
    double w_disable_node = 1.5;
    double w_enable_node = 1.5;

    int max_candidate_attempts = 1000;

    // Operators active under the current flags, with weights normalized to
    // sum to one.
    std::vector<std::pair<Op, double>> active_weights() const;
};

// Every operator copies `g` into `out`, applies the change, stamps
// `generated_by`, and resets fitness. Whole-genome validity (reachability,
// structural invariants) is the caller's job; see generate_candidate.
OpOutcome mutate_disable_edge(const Genome& g, Rng& rng, Genome& out);
OpOutcome mutate_enable_edge(const Genome& g, Rng& rng, Genome& out);
OpOutcome mutate_split_edge(const Genome& g, InnovationRegistry& reg,
                            const OperatorConfig& cfg, Rng& rng, Genome& out);
OpOutcome mutate_add_edge(const Genome& g, InnovationRegistry& reg,
                          const OperatorConfig& cfg, Rng& rng, Genome& out);
OpOutcome mutate_alter_edge_type(const Genome& g, const OperatorConfig& cfg,
                                 Rng& rng, Genome& out);
OpOutcome mutate_change_node_size(const Genome& g, Axis axis,
                                  const OperatorConfig& cfg, Rng& rng,
                                  Genome& out);
OpOutcome mutate_add_node(const Genome& g, InnovationRegistry& reg,
                          const OperatorConfig& cfg, Rng& rng, Genome& out);
OpOutcome mutate_split_node(const Genome& g, InnovationRegistry& reg,
                            Rng& rng, Genome& out);
OpOutcome mutate_merge_node(const Genome& g, InnovationRegistry& reg,
                            const OperatorConfig& cfg, Rng& rng, Genome& out);
OpOutcome mutate_disable_node(const Genome& g, Rng& rng, Genome& out);
OpOutcome mutate_enable_node(const Genome& g, Rng& rng, Genome& out);

OpOutcome apply_operator(Op op, const Genome& g, InnovationRegistry& reg,
                         const OperatorConfig& cfg, Rng& rng, Genome& out);

// Recombines two evaluated parents. `more_fit` must compare at least as fit
// as `less_fit` (lower fitness, ties broken toward the older genome).
Genome crossover(const Genome& more_fit, const Genome& less_fit,
                 const OperatorConfig& cfg, Rng& rng);

// True if `a` ranks as fit or fitter than `b` for parent ordering.
bool fitter(const Genome& a, const Genome& b);

struct CandidateResult {
    Genome candidate;
    // Innovation ids of structure the candidate inherited verbatim get their
    // weights from here during epigenetic initialization.
    std::vector<const Genome*> parents; // 1 for mutation, 2 for crossover
};

// Draws operators (and parents) until a structurally valid, reachable
// candidate emerges. Throws std::runtime_error after
// cfg.max_candidate_attempts failures.
CandidateResult generate_candidate(std::span<const Genome> population,
                                   const OperatorConfig& cfg,
                                   InnovationRegistry& reg, Rng& rng,
                                   bool allow_crossover);

} // namespace nevo

#endif
