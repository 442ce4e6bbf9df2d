#ifndef NEVO_INNOVATION_HPP
#define NEVO_INNOVATION_HPP

#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "nevo/genome.hpp"

namespace nevo {

// Master-side map of structural novelties. Edges are keyed by the ordered
// node pair; the nodes created by splitting an edge are keyed by the split
// edge's innovation id so the same structural event aligns across genomes.
// Identifiers are never reused for distinct structures.
class InnovationRegistry {
public:
    InnovationRegistry() = default;

    // Registers every node and edge of an existing genome (normally the
    // minimal genome) so later innovations continue after its identifiers.
    explicit InnovationRegistry(const Genome& seed);

    InnovationRegistry(const InnovationRegistry& other);
    InnovationRegistry& operator=(const InnovationRegistry& other);

    // Get-or-create the edge id for an ordered node pair.
    int edge_id(int in_node, int out_node);

    // Node id for splitting the given edge. The first split of an edge
    // defines the id; later splits reuse it unless the genome already
    // contains that node, in which case a fresh id is minted and remembered.
    int node_id_for_split(int split_edge_id, const Genome& g);

    int fresh_node_id();

    int peek_next_node_id() const;
    int peek_next_edge_id() const;

    std::string to_json() const;
    static InnovationRegistry from_json(const std::string& text);

private:
    mutable std::mutex mutex_;
    std::map<std::pair<int, int>, int> edge_innovations_;
    std::map<int, std::vector<int>> split_node_innovations_;
    int next_node_id_ = 0;
    int next_edge_id_ = 0;
};

} // namespace nevo

#endif
