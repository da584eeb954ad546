// Release gate for the extraction pipeline. Each criterion prints exactly
// one PASS/FAIL line with its measured time and budget; the exit code is
// the number of failed criteria, so CI can gate on zero.
//
// Criteria 1-6 are property checks against the library. Criteria 7-9 drive
// the installed `edag` binary end to end (generate -> label -> train ->
// predict -> evaluate) on the desk profile, so they double as a smoke test
// of the real command-line surface.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "json.hpp"

#include "edag/errors.hpp"

#include "edag/baselines.hpp"
#include "edag/corpus.hpp"
#include "edag/edag.hpp"
#include "edag/eval.hpp"
#include "edag/labeling.hpp"
#include "edag/layers.hpp"
#include "edag/model.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"
#include "edag/tensor.hpp"

#ifndef EDAG_CLI_PATH
#error "EDAG_CLI_PATH must point at the edag command-line binary"
#endif
#ifndef EDAG_DESK_PROFILE
#error "EDAG_DESK_PROFILE must point at profiles/desk.cfg"
#endif

namespace fs = std::filesystem;
using namespace edag;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Tiny harness

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_criterion(const std::string& name, double budget_seconds,
                   const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.pass && secs > budget_seconds) {
    out.pass = false;
    out.detail += (out.detail.empty() ? "" : "; ");
    out.detail += "over budget";
  }
  if (!out.pass) ++g_failures;
  std::printf("%s | %-28s | %7.1fs of %6.0fs | %s\n", out.pass ? "PASS" : "FAIL",
              name.c_str(), secs, budget_seconds, out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared randomized-schema helpers

SchemaRegistry random_registry(int num_roles) {
  EventTypeSpec spec;
  spec.code = "RT";
  spec.name = "RoundTrip";
  spec.min_matched_roles = 1;
  for (int r = 0; r < num_roles; ++r)
    spec.roles.push_back({"R" + std::to_string(r), r == 0, -1, -1});
  return make_registry({spec});
}

std::vector<EventRecord> random_records(Rng& rng, const EventTypeSpec& spec,
                                        int max_records, int pool_size) {
  std::vector<std::string> pool;
  for (int i = 0; i < pool_size; ++i) pool.push_back("E" + std::to_string(i));
  const int n = int(rng.uniform_int(1, max_records));
  std::vector<EventRecord> records;
  for (int i = 0; i < n; ++i) {
    EventRecord rec;
    rec.event_type = spec.code;
    for (const EventRole& role : spec.roles)
      if (rng.uniform(0, 1) < 0.6)
        rec.args[role.name] =
            pool[size_t(rng.uniform_int(0, int64_t(pool.size()) - 1))];
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Criterion 2 oracle: exhaustive path enumeration over the BIO-valid space.

std::vector<std::vector<int>> all_valid_paths(const BioMasks& masks, int len) {
  std::vector<std::vector<int>> result;
  std::vector<int> path(static_cast<size_t>(len), 0);
  auto rec = [&](auto&& self, int pos) -> void {
    if (pos == len) {
      result.push_back(path);
      return;
    }
    for (int t = 0; t < masks.num_tags; ++t) {
      if (pos == 0 ? !masks.start_ok(t) : !masks.transition_ok(path[size_t(pos) - 1], t))
        continue;
      path[size_t(pos)] = t;
      self(self, pos + 1);
    }
  };
  rec(rec, 0);
  return result;
}

double crf_path_score(const CrfLayer<double>& crf,
                      const std::vector<std::vector<double>>& emissions,
                      const std::vector<int>& path) {
  double s = crf.start_.at(0, path[0]) + emissions[0][size_t(path[0])];
  for (size_t t = 1; t < path.size(); ++t)
    s += crf.trans_.at(path[t - 1], path[t]) + emissions[t][size_t(path[t])];
  return s + crf.stop_.at(0, path.back());
}

std::vector<std::vector<double>> crf_emissions(const CrfLayer<double>& crf,
                                               const Tensor<double>& h) {
  std::vector<std::vector<double>> e(size_t(h.rows),
                                     std::vector<double>(size_t(crf.num_tags())));
  for (int64_t t = 0; t < h.rows; ++t)
    for (int j = 0; j < crf.num_tags(); ++j) {
      double v = crf.emit_.b.at(0, j);
      for (int64_t d = 0; d < h.cols; ++d) v += h.at(t, d) * crf.emit_.w.at(d, j);
      e[size_t(t)][size_t(j)] = v;
    }
  return e;
}

// ---------------------------------------------------------------------------
// Criterion 3 helpers: a generic scalar functional and a tiny gold document.

Tensor<double> weighted_scalar(const Tensor<double>& t, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> rv(size_t(t.rows)), cv(size_t(t.cols));
  for (double& x : rv) x = rng.uniform(-1, 1);
  for (double& x : cv) x = rng.uniform(-1, 1);
  Tensor<double> row = Tensor<double>::from(1, t.rows, std::move(rv));
  Tensor<double> col = Tensor<double>::from(t.cols, 1, std::move(cv));
  return matmul(matmul(row, t), col);
}

SchemaRegistry mini_registry() {
  EventTypeSpec spec;
  spec.code = "XX";
  spec.name = "Cross";
  spec.min_matched_roles = 1;
  spec.roles = {{"A", true, -1, -1}, {"B", false, -1, -1}};
  return make_registry({spec});
}

LabeledDoc two_sentence_gold() {
  LabeledDoc gold;
  gold.doc = make_document("d1", {"ACME OWES BOB", "BOB PAID ACME"});
  gold.tags = {
      {1, 2, 2, 2, 0, 0, 0, 0, 0, 0, 3, 4, 4},
      {3, 4, 4, 0, 0, 0, 0, 0, 0, 1, 2, 2, 2},
  };
  EventRecord rec;
  rec.event_type = "XX";
  rec.args["A"] = "ACME";
  rec.args["B"] = "BOB";
  gold.tables["XX"] = {rec};
  gold.triggered["XX"] = true;
  return gold;
}

// ---------------------------------------------------------------------------
// Criterion 4 oracle: expansion probabilities read straight off the gold
// records, so decoding must reproduce them if and only if the frontier
// search is correct.

class GoldScorer : public PathScorer {
 public:
  GoldScorer(const EventTypeSpec& spec, std::vector<std::string> candidates,
             const std::vector<EventRecord>& gold)
      : spec_(spec), candidates_(std::move(candidates)), gold_(gold) {}

  int num_candidates() const override { return int(candidates_.size()); }

  std::vector<double> expand(const std::vector<std::optional<int>>& history,
                             int role_idx) override {
    std::vector<double> probs(candidates_.size() + 1, 0.0);
    for (const EventRecord& rec : gold_) {
      if (!matches_prefix(rec, history)) continue;
      const std::optional<std::string> next = arg_of(rec, role_idx);
      if (!next) {
        probs.back() = 1.0;
        continue;
      }
      for (size_t c = 0; c < candidates_.size(); ++c)
        if (candidates_[c] == *next) probs[c] = 1.0;
    }
    return probs;
  }

 private:
  std::optional<std::string> arg_of(const EventRecord& rec, int role_idx) const {
    const std::string* v = rec.arg(spec_.roles[size_t(role_idx)].name);
    if (!v) return std::nullopt;
    return *v;
  }

  bool matches_prefix(const EventRecord& rec,
                      const std::vector<std::optional<int>>& history) const {
    for (size_t level = 0; level < history.size(); ++level) {
      const int role_idx = spec_.generation_order[level];
      const std::optional<std::string> want = arg_of(rec, role_idx);
      const std::optional<int>& got = history[level];
      if (want.has_value() != got.has_value()) return false;
      if (want && candidates_[size_t(*got)] != *want) return false;
    }
    return true;
  }

  const EventTypeSpec& spec_;
  std::vector<std::string> candidates_;
  const std::vector<EventRecord>& gold_;
};

// ---------------------------------------------------------------------------
// Criterion 5 oracle: exhaustive optimal record pairing.

int record_similarity(const EventRecord& pred, const EventRecord& gold,
                      const EventTypeSpec& spec) {
  int agree = 0;
  for (const EventRole& role : spec.roles) {
    const std::string* pv = pred.arg(role.name);
    const std::string* gv = gold.arg(role.name);
    if ((!pv && !gv) || (pv && gv && *pv == *gv)) ++agree;
  }
  return agree;
}

int greedy_pairing_total(const std::vector<EventRecord>& pred,
                         const std::vector<EventRecord>& gold,
                         const EventTypeSpec& spec) {
  int total = 0;
  for (const RecordPair& pair : pair_records(pred, gold, spec))
    if (pair.pred && pair.gold) total += record_similarity(*pair.pred, *pair.gold, spec);
  return total;
}

int optimal_pairing_total(const std::vector<EventRecord>& pred,
                          const std::vector<EventRecord>& gold,
                          const EventTypeSpec& spec) {
  const size_t n = std::max(pred.size(), gold.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int total = 0;
    for (size_t p = 0; p < n; ++p) {
      const size_t g = size_t(perm[p]);
      if (p < pred.size() && g < gold.size())
        total += record_similarity(pred[p], gold[g], spec);
    }
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Criteria 7-9: drive the real CLI.

const char* kCli = EDAG_CLI_PATH;
const char* kDeskProfile = EDAG_DESK_PROFILE;

// Runs one CLI invocation with stdout+stderr appended to a log file.
void cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(kCli) + " " + args + " >> " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc != 0)
    throw Error("command failed (exit " + std::to_string(rc) + "): edag " + args +
                "\n  log: " + log.string());
}

void split_lines(const fs::path& in, const fs::path& out, size_t begin, size_t end) {
  std::ifstream src(in);
  std::ofstream dst(out);
  std::string line;
  size_t idx = 0;
  while (std::getline(src, line)) {
    if (idx >= begin && idx < end) dst << line << '\n';
    ++idx;
  }
  if (idx < end)
    throw Error("split: " + in.string() + " has " + std::to_string(idx) +
                " lines, need " + std::to_string(end));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct DeskScores {
  double overall_f1 = 0;       // doc2edag, all docs, micro
  double multi_f1 = 0;         // doc2edag, multi-event docs
  double greedy_multi_f1 = 0;
  double greedy_multi_p = 0;
  double greedy_multi_r = 0;
  double dcfeeo_multi_f1 = 0;
};

// One full desk pipeline: corpus -> labels -> splits -> training -> four
// decoders -> four reports. Everything lands under `dir`.
void run_desk_pipeline(const fs::path& dir, bool path_memory) {
  fs::create_directories(dir);
  const fs::path log = dir / "cli.log";

  cli("gen --out-dir " + dir.string() +
          " --schema synthetic --num-docs 1000 --multi-ratio 0.3 --seed 7",
      log);
  cli("label --docs " + (dir / "docs.jsonl").string() + " --kb " +
          (dir / "kb.jsonl").string() + " --out " + (dir / "labels.jsonl").string() +
          " --schema synthetic",
      log);
  split_lines(dir / "docs.jsonl", dir / "train.jsonl", 0, 800);
  split_lines(dir / "docs.jsonl", dir / "dev.jsonl", 800, 900);
  split_lines(dir / "docs.jsonl", dir / "test.jsonl", 900, 1000);
  split_lines(dir / "labels.jsonl", dir / "train-labels.jsonl", 0, 800);
  split_lines(dir / "labels.jsonl", dir / "dev-labels.jsonl", 800, 900);
  split_lines(dir / "labels.jsonl", dir / "test-labels.jsonl", 900, 1000);

  std::string train_args = "train --docs " + (dir / "train.jsonl").string() +
                           " --labels " + (dir / "train-labels.jsonl").string() +
                           " --dev-docs " + (dir / "dev.jsonl").string() +
                           " --dev-labels " + (dir / "dev-labels.jsonl").string() +
                           " --schema synthetic --config " + kDeskProfile +
                           " --seed 11 --threads 4 --out-dir " +
                           (dir / "run").string();
  if (!path_memory) train_args += " --set use_path_memory=false";
  cli(train_args, log);

  for (const char* dec : {"doc2edag", "greedy", "dcfee-o", "dcfee-m"}) {
    cli("predict --docs " + (dir / "test.jsonl").string() + " --checkpoint " +
            (dir / "run" / "best.ckpt").string() + " --out " +
            (dir / (std::string("pred-") + dec + ".jsonl")).string() + " --decoder " +
            dec + " --threads 4",
        log);
    cli("eval --pred " + (dir / (std::string("pred-") + dec + ".jsonl")).string() +
            " --labels " + (dir / "test-labels.jsonl").string() +
            " --schema synthetic --out " +
            (dir / (std::string("report-") + dec + ".json")).string(),
        log);
  }
}

json load_report(const fs::path& dir, const std::string& decoder) {
  return json::parse(slurp(dir / ("report-" + decoder + ".json")));
}

DeskScores read_desk_scores(const fs::path& dir) {
  DeskScores s;
  const json d2e = load_report(dir, "doc2edag");
  const json greedy = load_report(dir, "greedy");
  const json dcfeeo = load_report(dir, "dcfee-o");
  s.overall_f1 = d2e["all"]["f1"].get<double>();
  s.multi_f1 = d2e["multi"]["f1"].get<double>();
  s.greedy_multi_f1 = greedy["multi"]["f1"].get<double>();
  s.greedy_multi_p = greedy["multi"]["precision"].get<double>();
  s.greedy_multi_r = greedy["multi"]["recall"].get<double>();
  s.dcfeeo_multi_f1 = dcfeeo["multi"]["f1"].get<double>();
  return s;
}

}  // namespace

// ===========================================================================

int main() {
  const fs::path work =
      fs::temp_directory_path() / ("edag-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);
  std::printf("work dir: %s\n", work.string().c_str());

  // -------------------------------------------------------------- 1
  run_criterion("edag-round-trip", 5, [] {
    Rng rng(4001);
    for (int i = 0; i < 1000; ++i) {
      const SchemaRegistry reg = random_registry(int(rng.uniform_int(1, 9)));
      const EventTypeSpec& spec = reg.specs[0];
      const std::vector<EventRecord> records =
          random_records(rng, spec, 5, int(rng.uniform_int(1, 10)));
      const std::vector<EventRecord> expect = canonicalize(records, spec);
      const Edag dag = records_to_edag(records, spec);
      validate_edag(dag, spec);
      if (edag_to_records(dag, spec) != expect)
        return Outcome{false, "mismatch on instance " + std::to_string(i)};
    }
    return Outcome{true, "1000 random record sets round-trip exactly"};
  });

  // -------------------------------------------------------------- 2
  run_criterion("crf-correctness", 10, [] {
    EventTypeSpec spec;
    spec.code = "ZZ";
    spec.name = "Tiny";
    spec.min_matched_roles = 1;
    spec.roles = {{"R0", true, -1, -1}, {"R1", false, -1, -1}};
    const SchemaRegistry reg = make_registry({spec});  // 5 tags
    const BioMasks masks = bio_masks(reg);

    double max_logz_err = 0;
    for (int i = 0; i < 100; ++i) {
      Rng rng(5000 + uint64_t(i));
      ParamRegistry<double> params;
      CrfLayer<double> crf(params, "crf", rng, 4, reg);
      for (double& v : *crf.trans_.data) v = rng.uniform(-1, 1);
      for (double& v : *crf.start_.data) v = rng.uniform(-1, 1);
      for (double& v : *crf.stop_.data) v = rng.uniform(-1, 1);

      const int len = 1 + i % 6;
      std::vector<double> hv(size_t(len) * 4);
      for (double& v : hv) v = rng.uniform(-2, 2);
      const Tensor<double> h = Tensor<double>::from(len, 4, std::move(hv));

      const auto emissions = crf_emissions(crf, h);
      const auto paths = all_valid_paths(masks, len);

      // Viterbi against exhaustive argmax.
      const std::vector<int> best_path = crf.viterbi(h);
      double best_score = -1e30;
      std::vector<int> best_oracle;
      for (const auto& p : paths) {
        const double s = crf_path_score(crf, emissions, p);
        if (s > best_score) {
          best_score = s;
          best_oracle = p;
        }
      }
      if (best_path != best_oracle)
        return Outcome{false, "viterbi mismatch on instance " + std::to_string(i)};

      // Forward-algorithm logZ against enumerated logsumexp.
      double m = -1e30;
      for (const auto& p : paths) m = std::max(m, crf_path_score(crf, emissions, p));
      double sum = 0;
      for (const auto& p : paths) sum += std::exp(crf_path_score(crf, emissions, p) - m);
      const double logz_enum = m + std::log(sum);

      const std::vector<int>& gold = paths[size_t(i) % paths.size()];
      const double nll = crf.nll(h, gold).item();
      const double logz_layer = nll + crf_path_score(crf, emissions, gold);
      max_logz_err = std::max(max_logz_err, std::abs(logz_layer - logz_enum));
      if (std::abs(logz_layer - logz_enum) > 1e-6)
        return Outcome{false, "logZ error " + fmt(std::abs(logz_layer - logz_enum)) +
                                  " on instance " + std::to_string(i)};
    }
    return Outcome{true, "100 instances; max logZ error " + fmt(max_logz_err)};
  });

  // -------------------------------------------------------------- 3
  run_criterion("gradient-suite", 120, [] {
    double worst_layer = 0;
    auto track = [&](double err) { worst_layer = std::max(worst_layer, err); };

    {  // Linear.
      Rng rng(6001);
      ParamRegistry<double> reg;
      Linear<double> lin(reg, "lin", rng, 5, 3);
      Tensor<double> x = Tensor<double>::from(4, 5, [&] {
        std::vector<double> v(20);
        for (double& e : v) e = rng.uniform(-1, 1);
        return v;
      }());
      auto f = [&](Tensor<double>&) { return weighted_scalar(lin.forward(x), 11); };
      track(grad_check(f, x));
      for (auto& [name, t] : reg.params()) track(grad_check(f, t));
      if (worst_layer >= 1e-4) return Outcome{false, "linear: " + fmt(worst_layer)};
    }
    {  // Transformer encoder with one masked row.
      Rng rng(6002);
      ParamRegistry<double> reg;
      TransformerEncoder<double> enc(reg, "t", rng, 2, 8, 12, 2, 0.0);
      std::vector<double> xv(4 * 8);
      for (double& e : xv) e = rng.uniform(-1, 1);
      Tensor<double> x = Tensor<double>::from(4, 8, std::move(xv));
      const std::vector<uint8_t> keep = {1, 1, 1, 0};
      Rng fwd(1);
      auto f = [&](Tensor<double>&) {
        return weighted_scalar(enc.encode(x, keep, false, fwd), 13);
      };
      track(grad_check(f, x));
      for (auto& [name, t] : reg.params()) track(grad_check(f, t));
      if (worst_layer >= 1e-4) return Outcome{false, "transformer: " + fmt(worst_layer)};
    }
    {  // AWA pooling with one masked row.
      Rng rng(6003);
      ParamRegistry<double> reg;
      AwaPool<double> awa(reg, "awa", rng, 8, 0.0);
      std::vector<double> xv(5 * 8);
      for (double& e : xv) e = rng.uniform(-1, 1);
      Tensor<double> x = Tensor<double>::from(5, 8, std::move(xv));
      const std::vector<uint8_t> keep = {1, 0, 1, 1, 1};
      Rng fwd(1);
      auto f = [&](Tensor<double>&) {
        return weighted_scalar(awa.pool(x, keep, false, fwd), 17);
      };
      track(grad_check(f, x));
      for (auto& [name, t] : reg.params()) track(grad_check(f, t));
      if (worst_layer >= 1e-4) return Outcome{false, "awa: " + fmt(worst_layer)};
    }
    {  // CRF negative log-likelihood.
      Rng rng(6004);
      ParamRegistry<double> reg;
      CrfLayer<double> crf(reg, "crf", rng, 6, mini_registry());
      std::vector<double> hv(5 * 6);
      for (double& e : hv) e = rng.uniform(-1, 1);
      Tensor<double> h = Tensor<double>::from(5, 6, std::move(hv));
      const std::vector<int> gold = {1, 2, 0, 3, 4};
      auto f = [&](Tensor<double>&) { return crf.nll(h, gold); };
      track(grad_check(f, h));
      for (auto& [name, t] : reg.params()) track(grad_check(f, t));
      if (worst_layer >= 1e-4) return Outcome{false, "crf: " + fmt(worst_layer)};
    }

    // End-to-end tiny model: every loss term active, 64-bit weights.
    ModelConfig cfg;
    cfg.d_w = 8;
    cfg.max_sentences = 6;
    cfg.max_sentence_len = 24;
    cfg.num_layers = 1;
    cfg.ff_dim = 16;
    cfg.num_heads = 2;
    cfg.dropout = 0.0;
    Rng rng(59);
    Doc2EdagModel<double> model(cfg, mini_registry(), rng);
    LabeledDoc gold = two_sentence_gold();
    Rng loss_rng(1);
    auto f = [&](Tensor<double>&) { return model.compute_loss(gold, 0, false, loss_rng); };
    double worst_e2e = 0;
    for (auto& [name, t] : model.params().params()) {
      model.params().zero_grads();
      worst_e2e = std::max(worst_e2e, grad_check(f, t));
      if (worst_e2e >= 1e-3)
        return Outcome{false, "end-to-end '" + name + "': " + fmt(worst_e2e)};
    }
    return Outcome{true, "layers max rel err " + fmt(worst_layer) + "; end-to-end " +
                             fmt(worst_e2e) + " over " +
                             std::to_string(model.params().params().size()) +
                             " parameters"};
  });

  // -------------------------------------------------------------- 4
  run_criterion("oracle-decode", 30, [] {
    GeneratorConfig gen;
    gen.seed = 7100;
    gen.num_docs = 1000;
    gen.multi_event_ratio = 0.4;
    const SchemaRegistry reg = synthetic_registry();
    const Corpus corpus = generate_corpus(gen, reg);

    for (const Document& doc : corpus.docs) {
      const auto& gold_records = corpus.kb.records.at(doc.doc_id);
      const LabeledDoc labeled = label_document(doc, gold_records, reg);

      // Candidate pool: every labeled mention surface in the document,
      // the same pool the neural decoder would see with a perfect tagger.
      std::vector<std::string> candidates;
      for (const TaggedMention& tm :
           tagged_mentions_from_tags(labeled.doc, labeled.tags, reg))
        if (std::find(candidates.begin(), candidates.end(), tm.mention.surface) ==
            candidates.end())
          candidates.push_back(tm.mention.surface);

      for (size_t t = 0; t < reg.specs.size(); ++t) {
        const EventTypeSpec& spec = reg.specs[t];
        std::vector<EventRecord> gold_of_type;
        for (const EventRecord& r : gold_records)
          if (r.event_type == spec.code) gold_of_type.push_back(r);
        if (gold_of_type.empty()) continue;

        GoldScorer scorer(spec, candidates, gold_of_type);
        const DecodeResult decoded = decode_edag(scorer, spec, candidates, 0.5, 64);
        if (edag_to_records(decoded.edag, spec) != canonicalize(gold_of_type, spec))
          return Outcome{false, "decode mismatch on " + doc.doc_id + " " + spec.code};
      }
    }
    return Outcome{true, "1000 docs reconstructed exactly from oracle expansions"};
  });

  // -------------------------------------------------------------- 5
  run_criterion("metric-oracle", 30, [] {
    EventTypeSpec spec;
    spec.code = "MM";
    spec.name = "Metric";
    spec.min_matched_roles = 1;
    spec.roles = {{"A", true, -1, -1},
                  {"B", false, -1, -1},
                  {"C", false, -1, -1},
                  {"D", false, -1, -1}};
    const SchemaRegistry reg = make_registry({spec});

    Rng rng(8001);
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto pred = random_records(rng, reg.specs[0], 3, 4);
      const auto gold = random_records(rng, reg.specs[0], 3, 4);
      if (greedy_pairing_total(pred, gold, reg.specs[0]) ==
          optimal_pairing_total(pred, gold, reg.specs[0]))
        ++agree;
    }
    if (agree < 950)
      return Outcome{false, "greedy optimal on only " + std::to_string(agree) + "/1000"};

    // Golden documents with slot counts worked out by hand.
    auto rec = [](std::initializer_list<std::pair<std::string, std::string>> args) {
      EventRecord r;
      r.event_type = "MM";
      for (const auto& [k, v] : args) r.args[k] = v;
      return r;
    };
    auto score_doc = [&](const std::vector<EventRecord>& pred,
                         const std::vector<EventRecord>& gold) {
      TableSet p, g;
      p["doc"]["MM"] = pred;
      g["doc"]["MM"] = gold;
      const EvalReport rep = evaluate_tables(p, g, reg);
      return rep.all.micro;
    };

    // (1) Perfect extraction of one record with three filled roles.
    RoleStats s1 = score_doc({rec({{"A", "x"}, {"B", "y"}, {"C", "z"}})},
                             {rec({{"A", "x"}, {"B", "y"}, {"C", "z"}})});
    if (s1.tp != 3 || s1.fp != 0 || s1.fn != 0)
      return Outcome{false, "golden 1: tp " + std::to_string(s1.tp) + " fp " +
                                std::to_string(s1.fp) + " fn " + std::to_string(s1.fn)};

    // (2) One right slot, two wrong values: each wrong value is both a
    // false positive and a miss of the gold value.
    RoleStats s2 = score_doc({rec({{"A", "x"}, {"B", "wrong"}, {"C", "also"}})},
                             {rec({{"A", "x"}, {"B", "y"}, {"C", "z"}})});
    if (s2.tp != 1 || s2.fp != 2 || s2.fn != 2)
      return Outcome{false, "golden 2: tp " + std::to_string(s2.tp) + " fp " +
                                std::to_string(s2.fp) + " fn " + std::to_string(s2.fn)};

    // (3) A correct record plus a spurious one: the phantom pairing charges
    // only the spurious filled slot.
    RoleStats s3 = score_doc({rec({{"A", "x"}, {"B", "y"}}), rec({{"A", "z"}})},
                             {rec({{"A", "x"}, {"B", "y"}})});
    if (s3.tp != 2 || s3.fp != 1 || s3.fn != 0)
      return Outcome{false, "golden 3: tp " + std::to_string(s3.tp) + " fp " +
                                std::to_string(s3.fp) + " fn " + std::to_string(s3.fn)};

    return Outcome{true, std::to_string(agree) +
                             "/1000 greedy==optimal; 3 golden docs exact"};
  });

  // -------------------------------------------------------------- 6
  run_criterion("labeling-fidelity", 30, [] {
    GeneratorConfig gen;
    gen.seed = 9100;
    gen.num_docs = 1000;
    gen.multi_event_ratio = 0.3;
    gen.noise = 0.0;  // noise-free: labeling should be near-perfect
    const SchemaRegistry reg = synthetic_registry();
    const Corpus corpus = generate_corpus(gen, reg);

    std::vector<LabeledDoc> labeled;
    labeled.reserve(corpus.docs.size());
    for (const Document& doc : corpus.docs)
      labeled.push_back(label_document(doc, corpus.kb.records.at(doc.doc_id), reg));

    const EvalReport rep = labeling_quality(labeled, corpus.kb, reg);
    const double f1 = rep.all.micro.f1();
    if (f1 < 0.99) return Outcome{false, "labeling F1 " + fmt(f1) + " < 0.99"};
    return Outcome{true, "labeling F1 " + fmt(f1) + " on 1000 noise-free docs"};
  });

  // -------------------------------------------------------------- 7, 8, 9
  const fs::path main_dir = work / "desk";
  DeskScores scores;
  bool desk_ok = false;

  run_criterion("desk-trend-reproduction", 1800, [&] {
    run_desk_pipeline(main_dir, true);
    scores = read_desk_scores(main_dir);
    desk_ok = true;

    std::string detail = "overall " + fmt(scores.overall_f1) + "; multi d2e " +
                         fmt(scores.multi_f1) + " vs greedy " +
                         fmt(scores.greedy_multi_f1) + " vs dcfee-o " +
                         fmt(scores.dcfeeo_multi_f1) + "; greedy multi P " +
                         fmt(scores.greedy_multi_p) + " R " + fmt(scores.greedy_multi_r);
    std::vector<std::string> broken;
    if (!(scores.overall_f1 >= 0.85)) broken.push_back("(a) overall F1 < 0.85");
    if (!(scores.multi_f1 - scores.greedy_multi_f1 >= 0.10))
      broken.push_back("(b) multi gap over GreedyDec < 10 points");
    if (!(scores.multi_f1 > scores.dcfeeo_multi_f1))
      broken.push_back("(c) multi F1 not above DCFEE-O");
    if (!(scores.greedy_multi_p >= scores.greedy_multi_r))
      broken.push_back("(d) GreedyDec multi precision < recall");
    if (!broken.empty()) {
      for (const std::string& b : broken) detail += "; " + b;
      return Outcome{false, detail};
    }
    return Outcome{true, detail};
  });

  run_criterion("path-memory-ablation", 1800, [&] {
    if (!desk_ok) return Outcome{false, "skipped: desk pipeline failed"};
    const fs::path ab_dir = work / "ablation";
    run_desk_pipeline(ab_dir, false);
    const double ablated = load_report(ab_dir, "doc2edag")["multi"]["f1"].get<double>();
    const double drop = scores.multi_f1 - ablated;
    const std::string detail = "multi F1 " + fmt(scores.multi_f1) + " -> " +
                               fmt(ablated) + " without path memory (drop " +
                               fmt(drop) + ")";
    if (drop < 0.05) return Outcome{false, detail + "; drop < 5 points"};
    return Outcome{true, detail};
  });

  run_criterion("pipeline-determinism", 2700, [&] {
    if (!desk_ok) return Outcome{false, "skipped: desk pipeline failed"};
    const fs::path rep_dir = work / "repeat";
    run_desk_pipeline(rep_dir, true);

    std::vector<std::string> artifacts = {"docs.jsonl", "kb.jsonl", "labels.jsonl",
                                          "run/best.ckpt"};
    for (const char* dec : {"doc2edag", "greedy", "dcfee-o", "dcfee-m"}) {
      artifacts.push_back(std::string("pred-") + dec + ".jsonl");
      artifacts.push_back(std::string("report-") + dec + ".json");
    }
    for (const std::string& rel : artifacts)
      if (slurp(main_dir / rel) != slurp(rep_dir / rel))
        return Outcome{false, rel + " differs between identical runs"};
    return Outcome{true, std::to_string(artifacts.size()) +
                             " artifacts byte-identical across a full rerun"};
  });

  std::printf("%d of 9 criteria failed\n", g_failures);
  if (g_failures == 0) fs::remove_all(work);
  return g_failures;
}
