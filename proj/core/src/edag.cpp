#include "edag/edag.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "edag/errors.hpp"

namespace edag {

namespace {

using ArgTuple = std::vector<std::optional<std::string>>;

ArgTuple record_tuple(const EventRecord& record, const EventTypeSpec& spec) {
  ArgTuple tuple;
  tuple.reserve(spec.generation_order.size());
  for (int role_idx : spec.generation_order) {
    const std::string* value = record.arg(spec.roles[role_idx].name);
    tuple.push_back(value ? std::optional<std::string>(*value) : std::nullopt);
  }
  return tuple;
}

// NA sorts after every string so fully-specified records come first.
bool arg_less(const std::optional<std::string>& a,
              const std::optional<std::string>& b) {
  if (a.has_value() != b.has_value()) return a.has_value();
  if (!a.has_value()) return false;
  return *a < *b;
}

bool tuple_less(const ArgTuple& a, const ArgTuple& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return arg_less(a[i], b[i]);
  }
  return false;
}

EventRecord tuple_to_record(const ArgTuple& tuple, const EventTypeSpec& spec) {
  EventRecord record;
  record.event_type = spec.code;
  for (const auto& role : spec.roles) record.args[role.name] = std::nullopt;
  for (size_t k = 0; k < tuple.size(); ++k)
    record.args[spec.roles[spec.generation_order[k]].name] = tuple[k];
  return record;
}

}  // namespace

std::vector<EventRecord> canonicalize(const std::vector<EventRecord>& records,
                                      const EventTypeSpec& spec) {
  std::vector<ArgTuple> tuples;
  for (const auto& record : records) {
    if (record.event_type != spec.code)
      throw SchemaError("record type " + record.event_type +
                        " canonicalized against spec " + spec.code);
    for (const auto& [role_name, value] : record.args)
      if (spec.role_index(role_name) < 0)
        throw SchemaError(spec.code + ": record has unknown role " + role_name);
    tuples.push_back(record_tuple(record, spec));
  }
  std::sort(tuples.begin(), tuples.end(), tuple_less);
  tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
  std::vector<EventRecord> out;
  out.reserve(tuples.size());
  for (const auto& tuple : tuples) out.push_back(tuple_to_record(tuple, spec));
  return out;
}

Edag records_to_edag(const std::vector<EventRecord>& records,
                     const EventTypeSpec& spec) {
  Edag edag;
  edag.event_type = spec.code;
  edag.role_order = spec.generation_order;
  edag.nodes.push_back({0, 0, std::nullopt, {}});
  edag.root_id = 0;
  for (const auto& record : canonicalize(records, spec)) {
    ArgTuple tuple = record_tuple(record, spec);
    int cur = edag.root_id;
    for (size_t k = 0; k < tuple.size(); ++k) {
      int next = -1;
      for (int child_id : edag.nodes[cur].children) {
        if (edag.nodes[child_id].argument == tuple[k]) {
          next = child_id;
          break;
        }
      }
      if (next < 0) {
        next = static_cast<int>(edag.nodes.size());
        edag.nodes.push_back({next, static_cast<int>(k) + 1, tuple[k], {}});
        edag.nodes[cur].children.push_back(next);
      }
      cur = next;
    }
  }
  return edag;
}

std::vector<EventRecord> edag_to_records(const Edag& edag,
                                         const EventTypeSpec& spec) {
  if (edag.event_type != spec.code)
    throw SchemaError("EDAG of type " + edag.event_type +
                      " decoded against spec " + spec.code);
  std::vector<EventRecord> out;
  ArgTuple path;
  int levels = edag.num_levels();
  // Iterative DFS keeping the argument prefix of the active path.
  struct Frame {
    int node_id;
    size_t next_child = 0;
  };
  std::vector<Frame> stack{{edag.root_id}};
  while (!stack.empty()) {
    Frame& frame = stack.back();
    const EdagNode& node = edag.nodes[frame.node_id];
    if (node.children.empty() && frame.next_child == 0) {
      if (node.level == levels)
        out.push_back(tuple_to_record(path, spec));
      else if (node.level != 0)  // a childless root is just an empty table
        throw Error("EDAG leaf at level " + std::to_string(node.level) +
                    " but " + std::to_string(levels) + " roles expected");
    }
    if (frame.next_child < node.children.size()) {
      int child_id = node.children[frame.next_child++];
      path.push_back(edag.nodes[child_id].argument);
      stack.push_back({child_id});
    } else {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
    }
  }
  return out;
}

void validate_edag(const Edag& edag, const EventTypeSpec& spec) {
  auto fail = [&](const std::string& what) {
    throw Error("invalid EDAG (" + edag.event_type + "): " + what);
  };
  if (edag.event_type != spec.code) fail("event type does not match spec");
  std::vector<int> sorted = edag.role_order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> identity(spec.roles.size());
  for (size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  if (sorted != identity) fail("role_order is not a role permutation");
  if (edag.nodes.empty() || edag.root_id < 0 ||
      edag.root_id >= static_cast<int>(edag.nodes.size()))
    fail("missing root node");
  const EdagNode& root = edag.nodes[edag.root_id];
  if (root.level != 0 || root.argument.has_value())
    fail("root must be an NA node at level 0");

  std::vector<int> seen(edag.nodes.size(), 0);
  std::vector<int> stack{edag.root_id};
  seen[edag.root_id] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const EdagNode& node = edag.nodes[id];
    if (node.node_id != id) fail("node_id does not match its index");
    if (node.children.empty() && node.level != edag.num_levels() &&
        node.level != 0)  // a childless root encodes an empty table
      fail("leaf above the final level");
    std::set<std::optional<std::string>> sibling_args;
    for (int child_id : edag.nodes[id].children) {
      if (child_id < 0 || child_id >= static_cast<int>(edag.nodes.size()))
        fail("child id out of range");
      const EdagNode& child = edag.nodes[child_id];
      if (child.level != node.level + 1) fail("child level must increment");
      if (!sibling_args.insert(child.argument).second)
        fail("siblings share an argument value");
      if (seen[child_id]++) fail("node reached twice");
      ++reached;
      stack.push_back(child_id);
    }
  }
  if (reached != static_cast<int>(edag.nodes.size()))
    fail("unreachable nodes in store");
}

std::string edag_to_json(const Edag& edag) {
  nlohmann::json j;
  j["event_type"] = edag.event_type;
  j["role_order"] = edag.role_order;
  j["root_id"] = edag.root_id;
  j["nodes"] = nlohmann::json::array();
  for (const auto& node : edag.nodes) {
    nlohmann::json n;
    n["id"] = node.node_id;
    n["level"] = node.level;
    if (node.argument)
      n["arg"] = *node.argument;
    else
      n["arg"] = nullptr;
    n["children"] = node.children;
    j["nodes"].push_back(std::move(n));
  }
  return j.dump();
}

Edag edag_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("EDAG JSON parse failed: ") + e.what());
  }
  try {
    Edag edag;
    edag.event_type = j.at("event_type").get<std::string>();
    edag.role_order = j.at("role_order").get<std::vector<int>>();
    edag.root_id = j.at("root_id").get<int>();
    for (const auto& n : j.at("nodes")) {
      EdagNode node;
      node.node_id = n.at("id").get<int>();
      node.level = n.at("level").get<int>();
      if (!n.at("arg").is_null())
        node.argument = n.at("arg").get<std::string>();
      node.children = n.at("children").get<std::vector<int>>();
      edag.nodes.push_back(std::move(node));
    }
    return edag;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("EDAG JSON has unexpected layout: ") + e.what());
  }
}

namespace {

void format_node(const Edag& edag, const EventTypeSpec& spec, int node_id,
                 int depth, std::ostringstream& out) {
  const EdagNode& node = edag.nodes[node_id];
  for (int i = 0; i < depth; ++i) out << "  ";
  if (node.level == 0) {
    out << "(" << edag.event_type << ")\n";
  } else {
    const auto& role = spec.roles[edag.role_order[node.level - 1]];
    out << role.name << " = " << (node.argument ? *node.argument : "NA")
        << "\n";
  }
  for (int child_id : node.children)
    format_node(edag, spec, child_id, depth + 1, out);
}

}  // namespace

std::string format_edag(const Edag& edag, const EventTypeSpec& spec) {
  std::ostringstream out;
  format_node(edag, spec, edag.root_id, 0, out);
  return out.str();
}

namespace {

struct PartialPath {
  std::vector<std::optional<int>> history;
  double log_prob = 0;
};

}  // namespace

DecodeResult decode_edag(PathScorer& scorer, const EventTypeSpec& spec,
                         const std::vector<std::string>& candidates,
                         double threshold, int frontier_cap) {
  if (scorer.num_candidates() != static_cast<int>(candidates.size()))
    throw Error("scorer candidate count does not match surface list");
  DecodeResult result;
  int n = static_cast<int>(candidates.size());
  std::vector<PartialPath> frontier{{{}, 0.0}};
  for (size_t level = 0; level < spec.generation_order.size(); ++level) {
    int role_idx = spec.generation_order[level];
    std::vector<PartialPath> next;
    for (const auto& path : frontier) {
      std::vector<double> probs = scorer.expand(path.history, role_idx);
      if (static_cast<int>(probs.size()) != n + 1)
        throw Error("scorer returned " + std::to_string(probs.size()) +
                    " probabilities for " + std::to_string(n) + " candidates");
      auto spawn = [&](std::optional<int> choice, double p) {
        PartialPath child = path;
        child.history.push_back(choice);
        child.log_prob += std::log(std::max(p, 1e-12));
        next.push_back(std::move(child));
      };
      bool any_entity = false;
      for (int c = 0; c < n; ++c) {
        if (probs[c] >= threshold) {
          spawn(c, probs[c]);
          any_entity = true;
        }
      }
      if (probs[n] >= threshold || !any_entity) spawn(std::nullopt, probs[n]);
    }
    if (static_cast<int>(next.size()) > frontier_cap) {
      std::stable_sort(next.begin(), next.end(),
                       [](const PartialPath& a, const PartialPath& b) {
                         return a.log_prob > b.log_prob;
                       });
      next.resize(frontier_cap);
      ++result.frontier_truncations;
    }
    frontier = std::move(next);
  }

  std::vector<EventRecord> records;
  for (const auto& path : frontier) {
    EventRecord record;
    record.event_type = spec.code;
    for (const auto& role : spec.roles) record.args[role.name] = std::nullopt;
    for (size_t k = 0; k < path.history.size(); ++k) {
      if (path.history[k])
        record.args[spec.roles[spec.generation_order[k]].name] =
            candidates[*path.history[k]];
    }
    records.push_back(std::move(record));
  }
  result.edag = records_to_edag(records, spec);
  return result;
}

}  // namespace edag
