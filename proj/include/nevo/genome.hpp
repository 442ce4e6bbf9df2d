#ifndef NEVO_GENOME_HPP
#define NEVO_GENOME_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nevo {

enum class NodeKind { input, hidden, output };
enum class EdgeKind { convolutional, pooling };

// Fitness is total cross entropy on the validation split; lower is better.
// A genome that has not been evaluated carries +infinity so it orders after
// every real result.
inline constexpr double kUnevaluated = std::numeric_limits<double>::infinity();

// One feature map. Batch-norm parameters and running statistics live on the
// gene so they can be inherited along with the filter weights.
struct NodeGene {
    int innovation_id = -1;
    NodeKind kind = NodeKind::hidden;
    double depth = 0.0;   // input 0, output 1, hidden strictly between
    int size_x = 1;
    int size_y = 1;
    bool enabled = true;
    double bn_gamma = 1.0;
    double bn_beta = 0.0;
    double bn_running_mean = 0.0;
    double bn_running_var = 1.0;

    bool operator==(const NodeGene&) const = default;
};

// A filter (convolutional) or a scaled fractional max pool (pooling) between
// two feature maps. Convolutional weights are filter_y rows of filter_x
// values; pooling edges carry the single scale weight instead.
struct EdgeGene {
    int innovation_id = -1;
    int in_node = -1;
    int out_node = -1;
    EdgeKind kind = EdgeKind::convolutional;
    bool enabled = true;
    int filter_x = 0;
    int filter_y = 0;
    std::vector<double> weights;
    double scale = 1.0;

    std::size_t weight_count() const {
        return kind == EdgeKind::convolutional
                   ? static_cast<std::size_t>(filter_x) * filter_y
                   : 1u;
    }

    bool operator==(const EdgeGene&) const = default;
};

struct Genome {
    std::vector<NodeGene> nodes;   // kept sorted by innovation_id
    std::vector<EdgeGene> edges;   // kept sorted by innovation_id
    double fitness = kUnevaluated;
    std::string generated_by = "minimal";
    std::int64_t generation_id = -1;

    bool evaluated() const { return fitness != kUnevaluated; }

    const NodeGene* find_node(int innovation_id) const;
    NodeGene* find_node(int innovation_id);
    const EdgeGene* find_edge(int innovation_id) const;
    EdgeGene* find_edge(int innovation_id);
    const EdgeGene* find_edge_between(int in_node, int out_node) const;

    void insert_node(NodeGene n);
    void insert_edge(EdgeGene e);

    int enabled_node_count() const;
    int enabled_edge_count() const;
    int enabled_edge_count(EdgeKind kind) const;

    // All trainable reals: enabled conv filter entries, enabled pooling
    // scales, and gamma/beta for every enabled hidden node.
    long trainable_weight_count() const;
};

// Filter size connecting two feature maps: |out_d - in_d| + 1 per dimension.
std::pair<int, int> conv_filter_dims(std::pair<int, int> in_dims,
                                     std::pair<int, int> out_dims);

// Input node at depth 0 sized to the dataset image, one 1x1 output node per
// class at depth 1, and one convolutional edge from the input to each output.
Genome minimal_genome(int input_size_x, int input_size_y, int num_classes);

// True iff every output node can be reached from the input node through
// enabled nodes and edges. Candidates that fail this are discarded.
bool reachable(const Genome& g);

// Enabled nodes ascending by depth, ties by innovation_id. Throws
// std::runtime_error if an enabled edge does not go forward in the ordering.
std::vector<int> evaluation_order(const Genome& g);

// Full structural validation; nullopt when the genome is sound, otherwise a
// description of the first violated invariant.
std::optional<std::string> structural_fault(const Genome& g);

std::string serialize(const Genome& g);
Genome deserialize(const std::string& bytes);   // throws DataError
void save_genome(const Genome& g, const std::string& path);
Genome load_genome(const std::string& path);    // throws DataError

std::string export_dot(const Genome& g);

int input_node_id(const Genome& g);
// Ascending by innovation_id; the position in this list is the class index.
std::vector<int> output_node_ids(const Genome& g);

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);

} // namespace nevo

#endif
