#include "edag/eval.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

#include "edag/errors.hpp"

namespace edag {

RoleStats& RoleStats::operator+=(const RoleStats& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

double RoleStats::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double RoleStats::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double RoleStats::f1() const {
  double p = precision(), r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

namespace {

int similarity(const EventRecord& a, const EventRecord& b,
               const EventTypeSpec& spec) {
  int score = 0;
  for (const auto& role : spec.roles) {
    const std::string* va = a.arg(role.name);
    const std::string* vb = b.arg(role.name);
    if (va == nullptr && vb == nullptr)
      ++score;
    else if (va && vb && *va == *vb)
      ++score;
  }
  return score;
}

}  // namespace

std::vector<RecordPair> pair_records(const std::vector<EventRecord>& pred,
                                     const std::vector<EventRecord>& gold,
                                     const EventTypeSpec& spec) {
  std::vector<bool> pred_used(pred.size(), false);
  std::vector<bool> gold_used(gold.size(), false);
  std::vector<RecordPair> pairs;
  size_t rounds = std::min(pred.size(), gold.size());
  for (size_t round = 0; round < rounds; ++round) {
    int best_sim = -1;
    size_t best_p = 0, best_g = 0;
    for (size_t p = 0; p < pred.size(); ++p) {
      if (pred_used[p]) continue;
      for (size_t g = 0; g < gold.size(); ++g) {
        if (gold_used[g]) continue;
        int sim = similarity(pred[p], gold[g], spec);
        if (sim > best_sim) {
          best_sim = sim;
          best_p = p;
          best_g = g;
        }
      }
    }
    pred_used[best_p] = gold_used[best_g] = true;
    pairs.push_back({pred[best_p], gold[best_g]});
  }
  for (size_t p = 0; p < pred.size(); ++p)
    if (!pred_used[p]) pairs.push_back({pred[p], std::nullopt});
  for (size_t g = 0; g < gold.size(); ++g)
    if (!gold_used[g]) pairs.push_back({std::nullopt, gold[g]});
  return pairs;
}

void score_pair(const RecordPair& pair, const EventTypeSpec& spec,
                std::map<std::string, RoleStats>& stats) {
  for (const auto& role : spec.roles) {
    const std::string* pv =
        pair.pred ? pair.pred->arg(role.name) : nullptr;
    const std::string* gv =
        pair.gold ? pair.gold->arg(role.name) : nullptr;
    RoleStats& s = stats[role.name];
    if (pv && gv && *pv == *gv) {
      ++s.tp;
    } else if (pv) {
      ++s.fp;
      if (gv) ++s.fn;
    } else if (gv) {
      ++s.fn;
    }
  }
}

namespace {

void finalize_slice(EvalSlice& slice) {
  double f1_sum = 0;
  int f1_count = 0;
  for (auto& [code, type_report] : slice.types) {
    type_report.micro = RoleStats{};
    for (const auto& [role, stats] : type_report.roles)
      type_report.micro += stats;
    slice.micro += type_report.micro;
    f1_sum += type_report.micro.f1();
    ++f1_count;
  }
  slice.macro_f1 = f1_count == 0 ? 0.0 : f1_sum / f1_count;
}

void score_doc_into(EvalSlice& slice,
                    const std::map<std::string, std::vector<EventRecord>>& pred,
                    const std::map<std::string, std::vector<EventRecord>>& gold,
                    const SchemaRegistry& registry) {
  ++slice.num_docs;
  static const std::vector<EventRecord> kEmpty;
  for (const auto& spec : registry.specs) {
    auto pit = pred.find(spec.code);
    auto git = gold.find(spec.code);
    const auto& p = pit == pred.end() ? kEmpty : pit->second;
    const auto& g = git == gold.end() ? kEmpty : git->second;
    if (p.empty() && g.empty()) continue;  // type absent on both sides
    auto& type_report = slice.types[spec.code];
    for (const auto& pair : pair_records(p, g, spec))
      score_pair(pair, spec, type_report.roles);
  }
}

}  // namespace

EvalReport evaluate_tables(const TableSet& pred, const TableSet& gold,
                           const SchemaRegistry& registry) {
  for (const auto& [doc_id, tables] : pred) {
    if (!gold.count(doc_id))
      throw Error("prediction for unknown doc_id: " + doc_id);
    for (const auto& [code, records] : tables)
      if (registry.spec_index(code) < 0)
        throw SchemaError("prediction with unknown event type " + code);
  }
  EvalReport report;
  static const std::map<std::string, std::vector<EventRecord>> kNoTables;
  for (const auto& [doc_id, gold_tables] : gold) {
    auto pit = pred.find(doc_id);
    const auto& pred_tables = pit == pred.end() ? kNoTables : pit->second;
    int gold_count = 0;
    for (const auto& [code, records] : gold_tables)
      gold_count += static_cast<int>(records.size());
    score_doc_into(report.all, pred_tables, gold_tables, registry);
    if (gold_count > 1)
      score_doc_into(report.multi_event, pred_tables, gold_tables, registry);
    else
      score_doc_into(report.single_event, pred_tables, gold_tables, registry);
  }
  finalize_slice(report.all);
  finalize_slice(report.single_event);
  finalize_slice(report.multi_event);
  return report;
}

namespace {

void format_slice(const EvalSlice& slice, const std::string& title,
                  std::ostringstream& out) {
  char line[160];
  out << title << " (" << slice.num_docs << " docs)\n";
  for (const auto& [code, type_report] : slice.types) {
    std::snprintf(line, sizeof(line),
                  "  %-4s P %6.4f  R %6.4f  F1 %6.4f  (tp %ld fp %ld fn %ld)\n",
                  code.c_str(), type_report.micro.precision(),
                  type_report.micro.recall(), type_report.micro.f1(),
                  type_report.micro.tp, type_report.micro.fp,
                  type_report.micro.fn);
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "  %-4s P %6.4f  R %6.4f  F1 %6.4f  macro-F1 %6.4f\n", "all",
                slice.micro.precision(), slice.micro.recall(),
                slice.micro.f1(), slice.macro_f1);
  out << line;
}

nlohmann::json slice_json(const EvalSlice& slice) {
  nlohmann::json j;
  j["num_docs"] = slice.num_docs;
  j["precision"] = slice.micro.precision();
  j["recall"] = slice.micro.recall();
  j["f1"] = slice.micro.f1();
  j["macro_f1"] = slice.macro_f1;
  j["types"] = nlohmann::json::object();
  for (const auto& [code, type_report] : slice.types) {
    nlohmann::json t;
    t["precision"] = type_report.micro.precision();
    t["recall"] = type_report.micro.recall();
    t["f1"] = type_report.micro.f1();
    t["roles"] = nlohmann::json::object();
    for (const auto& [role, stats] : type_report.roles) {
      t["roles"][role] = {{"tp", stats.tp},
                          {"fp", stats.fp},
                          {"fn", stats.fn},
                          {"precision", stats.precision()},
                          {"recall", stats.recall()},
                          {"f1", stats.f1()}};
    }
    j["types"][code] = std::move(t);
  }
  return j;
}

}  // namespace

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  format_slice(report.all, "overall", out);
  format_slice(report.single_event, "single-event", out);
  format_slice(report.multi_event, "multi-event", out);
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["all"] = slice_json(report.all);
  j["single"] = slice_json(report.single_event);
  j["multi"] = slice_json(report.multi_event);
  return j.dump(2);
}

}  // namespace edag
