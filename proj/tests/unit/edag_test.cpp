#include "edag/edag.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"

#include "edag/errors.hpp"
#include "edag/rng.hpp"

using namespace edag;

namespace {

// One spec with R generic roles (Role0..Role{R-1}), declaration order as
// generation order.
EventTypeSpec roles_spec(int num_roles) {
  EventTypeSpec spec;
  spec.code = "XX";
  spec.name = "Test";
  spec.min_matched_roles = 1;
  for (int i = 0; i < num_roles; ++i)
    spec.roles.push_back({"Role" + std::to_string(i), i == 0, -1, -1});
  return make_registry({spec}).specs[0];
}

EventRecord rec(const EventTypeSpec& spec,
                std::vector<std::optional<std::string>> args) {
  EventRecord record;
  record.event_type = spec.code;
  for (size_t i = 0; i < spec.roles.size(); ++i)
    record.args[spec.roles[i].name] =
        i < args.size() ? args[i] : std::nullopt;
  return record;
}

}  // namespace

TEST_CASE("canonicalize dedupes and sorts with NA last") {
  EventTypeSpec spec = roles_spec(2);
  auto a_b = rec(spec, {"A", "B"});
  auto a_na = rec(spec, {"A", std::nullopt});
  auto b_a = rec(spec, {"B", "A"});

  SUBCASE("duplicates collapse") {
    auto out = canonicalize({a_b, a_b}, spec);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == a_b);
  }
  SUBCASE("lexicographic order by role tuple") {
    auto out = canonicalize({b_a, a_b}, spec);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == a_b);
    CHECK(out[1] == b_a);
  }
  SUBCASE("NA sorts after any value") {
    auto out = canonicalize({a_na, a_b}, spec);
    CHECK(out[0] == a_b);
    CHECK(out[1] == a_na);
  }
  SUBCASE("idempotent on random inputs") {
    Rng rng(13);
    EventTypeSpec spec5 = roles_spec(5);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<EventRecord> records;
      int n = static_cast<int>(rng.uniform_int(0, 5));
      for (int i = 0; i < n; ++i) {
        std::vector<std::optional<std::string>> args;
        for (int r = 0; r < 5; ++r)
          args.push_back(rng.bernoulli(0.3)
                             ? std::nullopt
                             : std::optional<std::string>(std::string(
                                   1, static_cast<char>('A' + rng.uniform_int(0, 4)))));
        records.push_back(rec(spec5, args));
      }
      auto once = canonicalize(records, spec5);
      CHECK(canonicalize(once, spec5) == once);
    }
  }
  SUBCASE("wrong event type rejected") {
    EventRecord other = a_b;
    other.event_type = "YY";
    CHECK_THROWS_AS(canonicalize({other}, spec), SchemaError);
  }
}

TEST_CASE("records_to_edag merges shared prefixes") {
  EventTypeSpec spec = roles_spec(2);

  SUBCASE("single record becomes a chain") {
    Edag edag = records_to_edag({rec(spec, {"A", "B"})}, spec);
    validate_edag(edag, spec);
    CHECK(edag.nodes.size() == 3);  // root + 2 levels
    CHECK(edag.nodes[edag.root_id].children.size() == 1);
  }

  SUBCASE("three records over two roles share prefix nodes") {
    Edag edag = records_to_edag(
        {rec(spec, {"A", "B"}), rec(spec, {"A", "C"}), rec(spec, {"D", "B"})},
        spec);
    validate_edag(edag, spec);
    CHECK(edag.nodes.size() == 6);  // root + 5
    const EdagNode& root = edag.nodes[edag.root_id];
    REQUIRE(root.children.size() == 2);
    const EdagNode& a = edag.nodes[root.children[0]];
    const EdagNode& d = edag.nodes[root.children[1]];
    CHECK(a.argument == "A");
    CHECK(d.argument == "D");
    CHECK(a.children.size() == 2);
    CHECK(d.children.size() == 1);
  }

  SUBCASE("identical prefixes merge into one branch point") {
    EventTypeSpec spec3 = roles_spec(3);
    Edag edag = records_to_edag(
        {rec(spec3, {"P", "Q", "X"}), rec(spec3, {"P", "Q", "Y"})}, spec3);
    validate_edag(edag, spec3);
    CHECK(edag.nodes.size() == 5);  // root, P, Q, X, Y
  }

  SUBCASE("node count bound: |R| * roles + 1 with equality iff no sharing") {
    Edag shared = records_to_edag(
        {rec(spec, {"A", "B"}), rec(spec, {"A", "C"})}, spec);
    CHECK(shared.nodes.size() < 2 * 2 + 1);
    Edag disjoint = records_to_edag(
        {rec(spec, {"A", "B"}), rec(spec, {"C", "D"})}, spec);
    CHECK(disjoint.nodes.size() == 2 * 2 + 1);
  }

  SUBCASE("empty record set is a lone root") {
    Edag edag = records_to_edag({}, spec);
    validate_edag(edag, spec);
    CHECK(edag.nodes.size() == 1);
    CHECK(edag_to_records(edag, spec).empty());
  }
}

TEST_CASE("edag_to_records enumerates paths depth-first") {
  EventTypeSpec spec = roles_spec(2);

  SUBCASE("five-node example decodes to its three records") {
    std::vector<EventRecord> records{rec(spec, {"A", "B"}), rec(spec, {"A", "C"}),
                                     rec(spec, {"D", "B"})};
    Edag edag = records_to_edag(records, spec);
    CHECK(edag_to_records(edag, spec) == canonicalize(records, spec));
  }

  SUBCASE("all-NA chain decodes to one empty record") {
    Edag edag = records_to_edag({rec(spec, {std::nullopt, std::nullopt})}, spec);
    auto out = edag_to_records(edag, spec);
    REQUIRE(out.size() == 1);
    CHECK(out[0].arg("Role0") == nullptr);
    CHECK(out[0].arg("Role1") == nullptr);
  }

  SUBCASE("leaf above the final level is a structural error") {
    Edag edag = records_to_edag({rec(spec, {"A", "B"})}, spec);
    edag.nodes[1].children.clear();  // level-1 node loses its leaf
    CHECK_THROWS_AS(edag_to_records(edag, spec), Error);
  }
}

TEST_CASE("round-trip equals canonicalize on random record sets") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    int num_roles = static_cast<int>(rng.uniform_int(1, 9));
    EventTypeSpec spec = roles_spec(num_roles);
    int n = static_cast<int>(rng.uniform_int(0, 5));
    std::vector<EventRecord> records;
    for (int i = 0; i < n; ++i) {
      std::vector<std::optional<std::string>> args;
      for (int r = 0; r < num_roles; ++r) {
        if (rng.bernoulli(0.3))
          args.push_back(std::nullopt);
        else
          args.push_back("E" + std::to_string(rng.uniform_int(0, 9)));
      }
      records.push_back(rec(spec, args));
    }
    Edag edag = records_to_edag(records, spec);
    validate_edag(edag, spec);
    CHECK(edag_to_records(edag, spec) == canonicalize(records, spec));
    CHECK(edag.nodes.size() <= records.size() * num_roles + 1);
  }
}

TEST_CASE("validate_edag rejects corrupted structures") {
  EventTypeSpec spec = roles_spec(2);
  Edag good = records_to_edag({rec(spec, {"A", "B"}), rec(spec, {"A", "C"})}, spec);

  SUBCASE("sibling argument duplication") {
    Edag bad = good;
    bad.nodes[3].argument = bad.nodes[2].argument;
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
  SUBCASE("level skip") {
    Edag bad = good;
    bad.nodes[2].level = 3;
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
  SUBCASE("node id mismatch") {
    Edag bad = good;
    bad.nodes[1].node_id = 9;
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
  SUBCASE("unreachable node") {
    Edag bad = good;
    bad.nodes.push_back({static_cast<int>(bad.nodes.size()), 2, "Z", {}});
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
  SUBCASE("bad role order") {
    Edag bad = good;
    bad.role_order = {0, 0};
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
  SUBCASE("root with a value") {
    Edag bad = good;
    bad.nodes[bad.root_id].argument = "A";
    CHECK_THROWS_AS(validate_edag(bad, spec), Error);
  }
}

TEST_CASE("EDAG JSON serialization round-trips") {
  EventTypeSpec spec = roles_spec(3);
  Edag edag = records_to_edag(
      {rec(spec, {"A", std::nullopt, "C"}), rec(spec, {"A", "B", "C"})}, spec);
  std::string json = edag_to_json(edag);
  Edag back = edag_from_json(json);
  validate_edag(back, spec);
  CHECK(edag_to_json(back) == json);
  CHECK(edag_to_records(back, spec) == edag_to_records(edag, spec));
  CHECK_THROWS_AS(edag_from_json("{not json"), IoError);
  CHECK_THROWS_AS(edag_from_json("{\"event_type\":\"XX\"}"), IoError);
}

TEST_CASE("format_edag renders an indented tree") {
  EventTypeSpec spec = roles_spec(2);
  Edag edag = records_to_edag({rec(spec, {"A", std::nullopt})}, spec);
  std::string text = format_edag(edag, spec);
  CHECK(text.find("(XX)") != std::string::npos);
  CHECK(text.find("Role0 = A") != std::string::npos);
  CHECK(text.find("Role1 = NA") != std::string::npos);
}

namespace {

// Deterministic scorer driven by a fixed probability table per level.
class TableScorer : public PathScorer {
 public:
  TableScorer(int num_candidates, std::vector<std::vector<double>> per_level)
      : n_(num_candidates), per_level_(std::move(per_level)) {}
  int num_candidates() const override { return n_; }
  std::vector<double> expand(const std::vector<std::optional<int>>& history,
                             int) override {
    return per_level_.at(history.size());
  }

 private:
  int n_;
  std::vector<std::vector<double>> per_level_;
};

// Oracle over gold records: probability 1 for arguments consistent with the
// path history, 0 elsewhere.
class OracleScorer : public PathScorer {
 public:
  OracleScorer(const EventTypeSpec& spec, std::vector<EventRecord> gold,
               std::vector<std::string> candidates)
      : spec_(spec), gold_(std::move(gold)), candidates_(std::move(candidates)) {}
  int num_candidates() const override {
    return static_cast<int>(candidates_.size());
  }
  std::vector<double> expand(const std::vector<std::optional<int>>& history,
                             int role_idx) override {
    std::vector<double> probs(candidates_.size() + 1, 0.0);
    for (const auto& record : gold_) {
      if (!consistent(record, history)) continue;
      const std::string* value = record.arg(spec_.roles[role_idx].name);
      if (!value) {
        probs.back() = 1.0;
        continue;
      }
      for (size_t c = 0; c < candidates_.size(); ++c)
        if (candidates_[c] == *value) probs[c] = 1.0;
    }
    return probs;
  }

 private:
  bool consistent(const EventRecord& record,
                  const std::vector<std::optional<int>>& history) const {
    for (size_t k = 0; k < history.size(); ++k) {
      const std::string* value =
          record.arg(spec_.roles[spec_.generation_order[k]].name);
      if (history[k].has_value()) {
        if (!value || candidates_[*history[k]] != *value) return false;
      } else if (value) {
        return false;
      }
    }
    return true;
  }

  const EventTypeSpec& spec_;
  std::vector<EventRecord> gold_;
  std::vector<std::string> candidates_;
};

}  // namespace

TEST_CASE("decode_edag expands candidates over the threshold") {
  EventTypeSpec spec = roles_spec(2);

  SUBCASE("all below threshold yields a single all-NA record") {
    TableScorer scorer(2, {{0.4, 0.3, 0.2}, {0.1, 0.2, 0.3}});
    DecodeResult result = decode_edag(scorer, spec, {"A", "B"});
    validate_edag(result.edag, spec);
    auto records = edag_to_records(result.edag, spec);
    auto expected = records_to_edag({rec(spec, {std::nullopt, std::nullopt})}, spec);
    CHECK(records == edag_to_records(expected, spec));
  }

  SUBCASE("two candidates over threshold at the first role branch") {
    TableScorer scorer(2, {{0.9, 0.8, 0.1}, {0.9, 0.2, 0.3}});
    DecodeResult result = decode_edag(scorer, spec, {"A", "B"});
    auto records = edag_to_records(result.edag, spec);
    REQUIRE(records.size() == 2);
    CHECK(*records[0].arg("Role0") == "A");
    CHECK(*records[1].arg("Role0") == "B");
    CHECK(*records[0].arg("Role1") == "A");
  }

  SUBCASE("NA expands alongside entities when its own score clears") {
    TableScorer scorer(1, {{0.9, 0.8}, {0.9, 0.0}});
    DecodeResult result = decode_edag(scorer, spec, {"A"});
    auto records = edag_to_records(result.edag, spec);
    REQUIRE(records.size() == 2);  // paths A-A and NA-A
    CHECK(records[0].arg("Role0") != nullptr);
    CHECK(records[1].arg("Role0") == nullptr);
  }

  SUBCASE("frontier cap keeps the most probable paths") {
    // every level doubles the frontier: 2 candidates, both over threshold
    EventTypeSpec spec4 = roles_spec(4);
    TableScorer scorer(2, {{0.9, 0.8, 0.0},
                           {0.9, 0.8, 0.0},
                           {0.9, 0.8, 0.0},
                           {0.9, 0.8, 0.0}});
    DecodeResult result = decode_edag(scorer, spec4, {"A", "B"}, 0.5, 4);
    CHECK(result.frontier_truncations > 0);
    auto records = edag_to_records(result.edag, spec4);
    CHECK(records.size() <= 4);
    // the all-A path (highest probability product) must survive
    bool has_all_a = false;
    for (const auto& record : records) {
      bool all_a = true;
      for (int r = 0; r < 4; ++r) {
        const std::string* v = record.arg("Role" + std::to_string(r));
        all_a = all_a && v && *v == "A";
      }
      has_all_a = has_all_a || all_a;
    }
    CHECK(has_all_a);
  }

  SUBCASE("scorer returning the wrong arity is an error") {
    TableScorer scorer(2, {{0.9, 0.8}, {0.9, 0.8}});  // missing NA slot
    CHECK_THROWS_AS(decode_edag(scorer, spec, {"A", "B"}), Error);
  }
}

TEST_CASE("oracle probabilities reconstruct gold tables exactly") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    int num_roles = static_cast<int>(rng.uniform_int(1, 6));
    EventTypeSpec spec = roles_spec(num_roles);
    int n = static_cast<int>(rng.uniform_int(1, 4));
    std::vector<EventRecord> gold;
    std::set<std::string> surfaces;
    for (int i = 0; i < n; ++i) {
      std::vector<std::optional<std::string>> args;
      for (int r = 0; r < num_roles; ++r) {
        if (rng.bernoulli(0.35)) {
          args.push_back(std::nullopt);
        } else {
          std::string e = "E" + std::to_string(rng.uniform_int(0, 7));
          surfaces.insert(e);
          args.push_back(e);
        }
      }
      gold.push_back(rec(spec, args));
    }
    std::vector<std::string> candidates(surfaces.begin(), surfaces.end());
    OracleScorer scorer(spec, gold, candidates);
    DecodeResult result = decode_edag(scorer, spec, candidates);
    CHECK(edag_to_records(result.edag, spec) == canonicalize(gold, spec));
    CHECK(result.frontier_truncations == 0);
  }
}
