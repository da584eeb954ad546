#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edag {

// One argument slot of an event type. BIO tag ids are assigned by
// make_registry and are stable for a given registry layout.
struct EventRole {
  std::string name;
  bool is_key = false;
  int b_tag = -1;
  int i_tag = -1;
};

struct EventTypeSpec {
  std::string code;  // short identifier, e.g. "EF"
  std::string name;  // human-readable, e.g. "Equity Freeze"
  std::vector<EventRole> roles;
  int min_matched_roles = 1;
  // Permutation of role indices used as the level order when growing an
  // entity DAG. Defaults to declaration order until recomputed from data.
  std::vector<int> generation_order;

  int role_index(std::string_view role_name) const;  // -1 if absent
  const EventRole* find_role(std::string_view role_name) const;
};

struct SchemaRegistry {
  std::vector<EventTypeSpec> specs;
  // [0] = "O", then "B-<code>.<role>" / "I-<code>.<role>" pairs in
  // declaration order. Size = 1 + 2 * total role count.
  std::vector<std::string> tag_vocabulary;

  int spec_index(std::string_view code) const;  // -1 if absent
  const EventTypeSpec* find_spec(std::string_view code) const;
  int num_tags() const { return static_cast<int>(tag_vocabulary.size()); }
};

// What a BIO tag id refers to. The "O" tag has no TagInfo.
struct TagInfo {
  int spec_idx = -1;
  int role_idx = -1;
  bool begin = false;
};
std::optional<TagInfo> tag_info(const SchemaRegistry& reg, int tag_id);

// One row of an event table. A missing or empty value means the role is
// unfilled (NA); role keys must come from the spec's role list.
struct EventRecord {
  std::string event_type;
  std::map<std::string, std::optional<std::string>> args;

  bool has_arg(std::string_view role_name) const;
  const std::string* arg(std::string_view role_name) const;  // null if NA

  bool operator==(const EventRecord&) const = default;
};

// Validates specs (unique codes, unique role names, >=1 key role,
// threshold <= role count), assigns BIO tag ids, and fills default
// generation orders.
SchemaRegistry make_registry(std::vector<EventTypeSpec> specs);

// The five financial-announcement event types with key-role markers and
// matching thresholds {EF:5, ER:4, EU:4, EO:4, EP:5}.
SchemaRegistry builtin_registry();

// Two compact event types for fast end-to-end runs; same machinery,
// smaller tag vocabulary.
SchemaRegistry synthetic_registry();

// True iff every key role is filled and the number of filled roles is at
// least spec.min_matched_roles. Unknown role names raise SchemaError.
bool validate_record(const EventRecord& record, const EventTypeSpec& spec);

// Reorders spec.generation_order by decreasing fraction of records (of
// this spec's type) in which each role is filled; ties keep declaration
// order. Returns false and leaves the order untouched when the corpus has
// no records of this type.
bool compute_generation_order(EventTypeSpec& spec,
                              const std::vector<EventRecord>& records);

// Text form used by --schema files and checkpoint compatibility digests.
std::string serialize_registry(const SchemaRegistry& reg);
SchemaRegistry parse_registry(const std::string& text);
SchemaRegistry load_registry(const std::string& path);

// CRC-32 of the canonical serialized registry, hex-encoded.
std::string registry_digest(const SchemaRegistry& reg);

}  // namespace edag
