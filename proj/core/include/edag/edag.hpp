#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edag/schema.hpp"

namespace edag {

// One argument node. level 0 is the virtual root; level k > 0 holds the
// argument for the role at generation position k-1. NA = nullopt.
struct EdagNode {
  int node_id = 0;
  int level = 0;
  std::optional<std::string> argument;
  std::vector<int> children;
};

// Per-event-type DAG whose root-to-leaf paths are the rows of the event
// table; records sharing argument prefixes share nodes.
struct Edag {
  std::string event_type;
  std::vector<int> role_order;  // permutation of role indices
  std::vector<EdagNode> nodes;  // indexed by node_id
  int root_id = 0;

  int num_levels() const { return static_cast<int>(role_order.size()); }
};

// Deduplicates and orders records by their argument tuple in role order;
// NA sorts after any string at each position. Output records carry every
// role key explicitly.
std::vector<EventRecord> canonicalize(const std::vector<EventRecord>& records,
                                      const EventTypeSpec& spec);

// Builds the prefix-merged DAG of the canonicalized records. Sibling order
// is first appearance in canonical record order.
Edag records_to_edag(const std::vector<EventRecord>& records,
                     const EventTypeSpec& spec);

// Enumerates root-to-leaf paths depth-first in sibling order. A leaf above
// the final level is a structural error.
std::vector<EventRecord> edag_to_records(const Edag& edag,
                                         const EventTypeSpec& spec);

// Checks the structural invariants: child levels increment, sibling
// arguments distinct, leaves only at the final level, every node reachable
// exactly once (tree-shaped store).
void validate_edag(const Edag& edag, const EventTypeSpec& spec);

std::string edag_to_json(const Edag& edag);
Edag edag_from_json(const std::string& text);

// Renders the DAG as an indented tree for eyeballing.
std::string format_edag(const Edag& edag, const EventTypeSpec& spec);

// Scores path expansions during decoding. Implemented by the neural model
// and by test oracles, so decoding logic is shared and injectable.
class PathScorer {
 public:
  virtual ~PathScorer() = default;
  virtual int num_candidates() const = 0;
  // Expansion probability per candidate plus one trailing NA slot, given
  // the arguments chosen so far (candidate index per completed level,
  // nullopt = NA) and the role index being filled.
  virtual std::vector<double> expand(
      const std::vector<std::optional<int>>& history, int role_idx) = 0;
};

struct DecodeResult {
  Edag edag;
  int frontier_truncations = 0;  // levels where the path cap dropped paths
};

// Breadth-wise frontier expansion over roles in generation order: every
// candidate scoring >= threshold spawns a branch, NA spawns on its own
// score or as the fallback when nothing clears the threshold. The frontier
// is capped by keeping the paths with the highest probability product.
DecodeResult decode_edag(PathScorer& scorer, const EventTypeSpec& spec,
                         const std::vector<std::string>& candidates,
                         double threshold = 0.5, int frontier_cap = 64);

}  // namespace edag
