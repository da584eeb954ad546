#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edag/schema.hpp"

namespace edag {

// Slot-level counters; both-NA slots count nothing.
struct RoleStats {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  RoleStats& operator+=(const RoleStats& other);
  double precision() const;
  double recall() const;
  double f1() const;
};

// A matched (predicted, gold) record pair; either side may be the all-NA
// phantom for unmatched leftovers.
struct RecordPair {
  std::optional<EventRecord> pred;
  std::optional<EventRecord> gold;
};

// Greedy maximum-similarity pairing without replacement. Similarity is the
// number of roles on which both sides agree (both-NA included); ties go to
// the lower predicted index, then the lower gold index.
std::vector<RecordPair> pair_records(const std::vector<EventRecord>& pred,
                                     const std::vector<EventRecord>& gold,
                                     const EventTypeSpec& spec);

// Per role: both equal and non-NA -> tp; pred non-NA but wrong -> fp (and
// fn when gold had a value); pred NA with gold non-NA -> fn.
void score_pair(const RecordPair& pair, const EventTypeSpec& spec,
                std::map<std::string, RoleStats>& stats);

// Micro scores of one event type plus its per-role breakdown.
struct TypeReport {
  std::map<std::string, RoleStats> roles;
  RoleStats micro;
};

// One slice of the corpus (all docs, single-event docs, multi-event docs).
struct EvalSlice {
  std::map<std::string, TypeReport> types;
  RoleStats micro;        // over all types' role slots
  double macro_f1 = 0;    // unweighted mean of per-type micro F1
  int num_docs = 0;
};

struct EvalReport {
  EvalSlice all;
  EvalSlice single_event;
  EvalSlice multi_event;
};

// Event tables per document: doc_id -> type -> records.
using TableSet = std::map<std::string, std::map<std::string, std::vector<EventRecord>>>;

// Aggregates slot statistics over all documents and splits them by gold
// record count (1 vs >1). Every predicted doc_id must exist in gold.
EvalReport evaluate_tables(const TableSet& pred, const TableSet& gold,
                           const SchemaRegistry& registry);

std::string format_report(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

}  // namespace edag
