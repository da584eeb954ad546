// edag: synthetic corpora -> distant labels -> training -> decoding -> scores.
//
// Commands: gen | label | train | predict | eval | inspect-edag. Every
// file-producing command drops a run manifest (resolved config + input
// digests + timings) next to its outputs so a run can be reconstructed.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "edag/baselines.hpp"
#include "edag/config.hpp"
#include "edag/corpus.hpp"
#include "edag/crc32.hpp"
#include "edag/edag.hpp"
#include "edag/errors.hpp"
#include "edag/eval.hpp"
#include "edag/labeling.hpp"
#include "edag/model.hpp"
#include "edag/schema.hpp"
#include "edag/serialization.hpp"
#include "edag/threading.hpp"
#include "edag/training.hpp"

#ifndef EDAG_VERSION
#define EDAG_VERSION "0.0.0"
#endif

namespace {

using namespace edag;
namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// --schema accepts the two built-in registries by name or a file path.
SchemaRegistry registry_from_arg(const std::string& arg) {
  if (arg == "builtin") return builtin_registry();
  if (arg == "synthetic") return synthetic_registry();
  return load_registry(arg);
}

std::optional<std::string> env_seed() {
  const char* raw = std::getenv("EDAG_SEED");
  if (!raw || !*raw) return std::nullopt;
  return std::string(raw);
}

std::map<std::string, std::string> parse_set_flags(
    const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const std::string& s : sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::string digest_of(const std::string& path) { return crc32_hex(crc32_file(path)); }

// Joins label rows (which store no text) back onto their documents.
std::vector<LabeledDoc> join_labels(const std::vector<Document>& docs,
                                    std::vector<LabeledDoc> labels,
                                    const std::string& what) {
  std::map<std::string, const Document*> by_id;
  for (const Document& d : docs) by_id[d.doc_id] = &d;
  for (LabeledDoc& l : labels) {
    auto it = by_id.find(l.doc.doc_id);
    if (it == by_id.end())
      throw IoError(what + ": labels reference doc_id '" + l.doc.doc_id +
                    "' absent from the corpus file");
    l.doc = *it->second;
  }
  return labels;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string out_dir;
  std::string schema = "builtin";
  int num_docs = 100;
  std::string seed;  // empty = EDAG_SEED env, else 1
  double multi_ratio = 0.29;
  int scatter = 2;
  double noise = 0.1;
};

int run_gen(const GenArgs& a) {
  const auto started = Clock::now();
  const SchemaRegistry registry = registry_from_arg(a.schema);

  GeneratorConfig cfg;
  cfg.num_docs = a.num_docs;
  cfg.multi_event_ratio = a.multi_ratio;
  cfg.scatter_degree = a.scatter;
  cfg.noise = a.noise;
  std::string seed_text = a.seed;
  if (seed_text.empty()) seed_text = env_seed().value_or("1");
  cfg.seed = std::stoull(seed_text);

  const Corpus corpus = generate_corpus(cfg, registry);
  ensure_dir(a.out_dir);
  const std::string docs_path = a.out_dir + "/docs.jsonl";
  const std::string kb_path = a.out_dir + "/kb.jsonl";
  write_docs_jsonl(docs_path, corpus.docs);
  write_kb_jsonl(kb_path, corpus.kb);

  int records = 0;
  int multi = 0;
  for (const auto& [id, recs] : corpus.kb.records) {
    records += int(recs.size());
    multi += recs.size() > 1 ? 1 : 0;
  }

  RunManifest manifest;
  manifest.command = "gen";
  manifest.tool_version = EDAG_VERSION;
  manifest.seed = cfg.seed;
  manifest.config = {{"num_docs", std::to_string(cfg.num_docs)},
                     {"multi_event_ratio", std::to_string(cfg.multi_event_ratio)},
                     {"scatter_degree", std::to_string(cfg.scatter_degree)},
                     {"noise", std::to_string(cfg.noise)},
                     {"schema", a.schema},
                     {"schema_digest", registry_digest(registry)}};
  manifest.timings_ms["total"] = ms_since(started);
  write_manifest(a.out_dir + "/manifest.json", manifest);

  std::cout << "gen: " << corpus.docs.size() << " documents, " << records
            << " records (" << multi << " multi-record docs) -> " << docs_path
            << ", " << kb_path << "\n";
  return 0;
}

// -------------------------------------------------------------- label ----

struct LabelArgs {
  std::string docs, kb, out;
  std::string schema = "builtin";
  bool quality = false;
};

int run_label(const LabelArgs& a) {
  const auto started = Clock::now();
  const SchemaRegistry registry = registry_from_arg(a.schema);
  const std::vector<Document> docs = read_docs_jsonl(a.docs);
  const KnowledgeBase kb = read_kb_jsonl(a.kb);

  static const std::vector<EventRecord> kNone;
  std::vector<LabeledDoc> labeled;
  labeled.reserve(docs.size());
  int kept = 0;
  int conflicts = 0;
  for (const Document& doc : docs) {
    auto it = kb.records.find(doc.doc_id);
    labeled.push_back(label_document(doc, it == kb.records.end() ? kNone : it->second,
                                     registry));
    kept += labeled.back().gold_record_count();
    conflicts += labeled.back().tag_conflicts;
  }
  write_labels_jsonl(a.out, labeled, registry);

  int kb_total = 0;
  for (const auto& [id, recs] : kb.records) kb_total += int(recs.size());
  std::cout << "label: " << labeled.size() << " documents, " << kept << "/" << kb_total
            << " records retained, " << conflicts << " tag conflicts -> " << a.out
            << "\n";
  if (a.quality) {
    std::cout << format_report(labeling_quality(labeled, kb, registry));
  }

  RunManifest manifest;
  manifest.command = "label";
  manifest.tool_version = EDAG_VERSION;
  manifest.config = {{"schema", a.schema},
                     {"schema_digest", registry_digest(registry)}};
  manifest.input_digests = {{a.docs, digest_of(a.docs)}, {a.kb, digest_of(a.kb)}};
  manifest.timings_ms["total"] = ms_since(started);
  write_manifest(a.out + ".manifest.json", manifest);
  return 0;
}

// -------------------------------------------------------------- train ----

struct TrainArgs {
  std::string docs, labels, out_dir;
  std::string dev_docs, dev_labels;
  double dev_fraction = 0.1;
  std::string schema = "builtin";
  std::string config_file;
  std::vector<std::string> sets;
  std::string seed;  // CLI override; highest precedence
  int threads = 0;
};

int run_train(const TrainArgs& a) {
  const auto started = Clock::now();
  if (a.threads > 0) set_num_threads(a.threads);
  SchemaRegistry registry = registry_from_arg(a.schema);

  // Config layers, weakest first: defaults < EDAG_SEED env < file < --set/--seed.
  std::map<std::string, std::string> env;
  if (auto seed = env_seed()) env["seed"] = *seed;
  std::map<std::string, std::string> file;
  if (!a.config_file.empty()) file = read_config_file(a.config_file);
  std::map<std::string, std::string> overrides = parse_set_flags(a.sets);
  if (!a.seed.empty()) overrides["seed"] = a.seed;
  const ResolvedConfig cfg = resolve_config(file, overrides, env);

  const std::vector<Document> docs = read_docs_jsonl(a.docs);
  std::vector<LabeledDoc> labeled =
      join_labels(docs, read_labels_jsonl(a.labels, registry), "train");

  std::vector<LabeledDoc> dev;
  if (!a.dev_docs.empty() || !a.dev_labels.empty()) {
    if (a.dev_docs.empty() || a.dev_labels.empty())
      throw ConfigError("train: --dev-docs and --dev-labels must be given together");
    dev = join_labels(read_docs_jsonl(a.dev_docs),
                      read_labels_jsonl(a.dev_labels, registry), "train");
  } else {
    // Deterministic tail split of the (already generator-shuffled) corpus.
    if (!(a.dev_fraction > 0.0 && a.dev_fraction < 1.0))
      throw ConfigError("train: --dev-fraction must be in (0, 1)");
    const size_t n_dev = std::max<size_t>(
        1, size_t(double(labeled.size()) * a.dev_fraction + 0.5));
    if (n_dev >= labeled.size())
      throw ConfigError("train: dev split would consume every document");
    dev.assign(labeled.end() - long(n_dev), labeled.end());
    labeled.resize(labeled.size() - n_dev);
  }

  // Fit each type's generation order to the training tables: roles filled
  // more often expand earlier. The fitted order travels inside the
  // checkpoint's schema text.
  std::map<std::string, std::vector<EventRecord>> by_type;
  for (const LabeledDoc& l : labeled)
    for (const auto& [type, recs] : l.tables)
      by_type[type].insert(by_type[type].end(), recs.begin(), recs.end());
  for (EventTypeSpec& spec : registry.specs) {
    auto it = by_type.find(spec.code);
    if (it != by_type.end()) compute_generation_order(spec, it->second);
  }

  ensure_dir(a.out_dir);
  {
    std::string echo;
    for (const auto& [key, value] : cfg.raw) echo += key + " = " + value + "\n";
    write_text_file(a.out_dir + "/config.cfg", echo);
  }

  Rng init_rng(cfg.train.seed);
  Doc2EdagModel<float> model(cfg.model, registry, init_rng);
  std::cout << "train: " << labeled.size() << " train docs, " << dev.size()
            << " dev docs, " << model.params().total_size() << " parameters, seed "
            << cfg.train.seed << "\n";

  const std::string metrics_path = a.out_dir + "/metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw IoError("train: cannot open '" + metrics_path + "'");

  int best_epoch = -1;
  double best_score = -1;
  auto on_epoch = [&](const EpochLog& log) {
    if (log.validated && log.dev_score > best_score) {
      best_score = log.dev_score;
      best_epoch = log.epoch;
    }
    nlohmann::json line{{"epoch", log.epoch},
                        {"objective", log.objective},
                        {"l_all", log.l_all},
                        {"er", log.er},
                        {"tr", log.tr},
                        {"dag", log.dag},
                        {"ks", log.ks},
                        {"grad_norm", log.grad_norm},
                        {"mention_mismatches", log.mention_mismatches},
                        {"gold_mention_docs", log.gold_mention_docs},
                        {"validated", log.validated},
                        {"dev_score", log.dev_score},
                        {"seconds", log.seconds}};
    metrics << line.dump() << "\n";
    metrics.flush();
    std::cout << "epoch " << log.epoch << "/" << cfg.train.max_epochs << "  objective "
              << log.objective << "  l_all " << log.l_all;
    if (log.validated) std::cout << "  dev " << log.dev_score;
    if (best_epoch > 0) std::cout << "  best " << best_score << "@" << best_epoch;
    std::cout << "  (" << log.seconds << "s)\n";
  };

  const TrainResult result = train(model, labeled, dev, cfg.train, on_epoch);

  const std::string ckpt_path = a.out_dir + "/best.ckpt";
  write_checkpoint_file(ckpt_path, result.best);

  nlohmann::json report{{"best_epoch", result.best_epoch},
                        {"best_dev_score", result.best_score},
                        {"epochs", result.epochs.size()},
                        {"train_docs", labeled.size()},
                        {"dev_docs", dev.size()},
                        {"parameters", model.params().total_size()},
                        {"total_seconds", ms_since(started) / 1000.0}};
  write_text_file(a.out_dir + "/report.json", report.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "train";
  manifest.tool_version = EDAG_VERSION;
  manifest.seed = cfg.train.seed;
  manifest.config = cfg.raw;
  manifest.config["schema"] = a.schema;
  manifest.config["schema_digest"] = registry_digest(registry);
  manifest.input_digests = {{a.docs, digest_of(a.docs)},
                            {a.labels, digest_of(a.labels)}};
  if (!a.dev_docs.empty()) {
    manifest.input_digests[a.dev_docs] = digest_of(a.dev_docs);
    manifest.input_digests[a.dev_labels] = digest_of(a.dev_labels);
  }
  manifest.timings_ms["total"] = ms_since(started);
  write_manifest(a.out_dir + "/manifest.json", manifest);

  std::cout << "train: best dev score " << result.best_score << " at epoch "
            << result.best_epoch << " -> " << ckpt_path << "\n";
  return 0;
}

// ------------------------------------------------------------ predict ----

struct PredictArgs {
  std::string docs, checkpoint, out;
  std::string decoder = "doc2edag";
  std::string schema;  // optional compatibility check
  int threads = 0;
  double trigger_threshold = -1;  // <0 = use the checkpoint's value
  double expand_threshold = -1;
  int frontier_cap = -1;
  double key_threshold = 0.5;
};

int run_predict(const PredictArgs& a) {
  const auto started = Clock::now();
  if (a.threads > 0) set_num_threads(a.threads);

  const CheckpointData ckpt = read_checkpoint_file(a.checkpoint);
  if (!a.schema.empty()) {
    const SchemaRegistry given = registry_from_arg(a.schema);
    if (serialize_registry(given) != ckpt.schema_text)
      throw ConfigError(
          "predict: checkpoint was trained under a different schema than --schema "
          "(digest " +
          registry_digest(parse_registry(ckpt.schema_text)) + " vs " +
          registry_digest(given) + ")");
  }
  const SchemaRegistry registry = parse_registry(ckpt.schema_text);

  Rng init_rng(1);  // overwritten by the checkpoint restore
  Doc2EdagModel<float> model(ckpt.config, registry, init_rng);
  restore_model(model, ckpt);
  model.set_decode_options(
      a.trigger_threshold >= 0 ? a.trigger_threshold : ckpt.config.trigger_threshold,
      a.expand_threshold >= 0 ? a.expand_threshold : ckpt.config.expand_threshold,
      a.frontier_cap >= 0 ? a.frontier_cap : ckpt.config.frontier_cap);

  const std::vector<Document> docs = read_docs_jsonl(a.docs);
  std::vector<Prediction> preds(docs.size());
  const double trig = model.config().trigger_threshold;
  parallel_for(int64_t(docs.size()), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const Document& doc = docs[size_t(i)];
      if (a.decoder == "doc2edag") {
        preds[size_t(i)] = model.predict(doc);
      } else {
        const auto st = model.infer_state(doc);
        if (a.decoder == "greedy")
          preds[size_t(i)] = greedy_decode(registry, st.doc, st.tagged_mentions,
                                           st.trigger_probs, trig);
        else if (a.decoder == "dcfee-o")
          preds[size_t(i)] = dcfee_o_decode(registry, st.doc, st.tagged_mentions,
                                            st.trigger_probs, st.key_probs,
                                            a.key_threshold);
        else
          preds[size_t(i)] = dcfee_m_decode(registry, st.doc, st.tagged_mentions,
                                            st.trigger_probs, st.key_probs,
                                            a.key_threshold);
      }
    }
  });
  write_predictions_jsonl(a.out, preds);

  int tables = 0;
  int truncations = 0;
  for (const Prediction& p : preds) {
    tables += int(p.tables.size());
    truncations += p.frontier_truncations;
  }

  RunManifest manifest;
  manifest.command = "predict";
  manifest.tool_version = EDAG_VERSION;
  manifest.config = {{"decoder", a.decoder},
                     {"trigger_threshold", std::to_string(trig)},
                     {"expand_threshold",
                      std::to_string(model.config().expand_threshold)},
                     {"frontier_cap", std::to_string(model.config().frontier_cap)},
                     {"key_threshold", std::to_string(a.key_threshold)},
                     {"schema_digest", registry_digest(registry)}};
  manifest.input_digests = {{a.docs, digest_of(a.docs)},
                            {a.checkpoint, digest_of(a.checkpoint)}};
  manifest.timings_ms["total"] = ms_since(started);
  write_manifest(a.out + ".manifest.json", manifest);

  std::cout << "predict: " << docs.size() << " documents with " << a.decoder << ", "
            << tables << " event tables, " << truncations
            << " frontier truncations -> " << a.out << "\n";
  return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string pred, labels;
  std::string schema = "builtin";
  std::string out;  // optional report.json
};

int run_eval(const EvalArgs& a) {
  const auto started = Clock::now();
  const SchemaRegistry registry = registry_from_arg(a.schema);
  const std::vector<Prediction> preds = read_predictions_jsonl(a.pred);
  const std::vector<LabeledDoc> gold_docs = read_labels_jsonl(a.labels, registry);

  TableSet pred, gold;
  for (const LabeledDoc& l : gold_docs) gold[l.doc.doc_id] = l.tables;
  for (const Prediction& p : preds) pred[p.doc_id] = p.tables;

  const EvalReport report = evaluate_tables(pred, gold, registry);
  std::cout << format_report(report);

  if (!a.out.empty()) {
    write_text_file(a.out, report_to_json(report) + "\n");
    RunManifest manifest;
    manifest.command = "eval";
    manifest.tool_version = EDAG_VERSION;
    manifest.config = {{"schema", a.schema},
                       {"schema_digest", registry_digest(registry)}};
    manifest.input_digests = {{a.pred, digest_of(a.pred)},
                              {a.labels, digest_of(a.labels)}};
    manifest.timings_ms["total"] = ms_since(started);
    write_manifest(a.out + ".manifest.json", manifest);
    std::cout << "eval: report -> " << a.out << "\n";
  }
  return 0;
}

// ------------------------------------------------------- inspect-edag ----

struct InspectArgs {
  std::string edag_json, pred, labels;
  std::string doc_id, type;
  std::string schema = "builtin";
};

const EventTypeSpec& spec_by_code(const SchemaRegistry& registry,
                                  const std::string& code) {
  for (const EventTypeSpec& spec : registry.specs)
    if (spec.code == code) return spec;
  throw SchemaError("inspect-edag: unknown event type '" + code + "'");
}

void render_tables(const SchemaRegistry& registry,
                   const std::map<std::string, std::vector<EventRecord>>& tables,
                   const std::string& only_type) {
  bool any = false;
  for (const auto& [type, records] : tables) {
    if (!only_type.empty() && type != only_type) continue;
    const EventTypeSpec& spec = spec_by_code(registry, type);
    const Edag dag = records_to_edag(records, spec);
    std::cout << format_edag(dag, spec);
    any = true;
  }
  if (!any) std::cout << "(no event tables" << (only_type.empty() ? "" : " of type " + only_type)
                      << ")\n";
}

int run_inspect(const InspectArgs& a) {
  const SchemaRegistry registry = registry_from_arg(a.schema);
  const int sources = int(!a.edag_json.empty()) + int(!a.pred.empty()) +
                      int(!a.labels.empty());
  if (sources != 1)
    throw ConfigError("inspect-edag: give exactly one of --edag, --pred, --labels");

  if (!a.edag_json.empty()) {
    const Edag dag = edag_from_json(read_text_file(a.edag_json));
    std::cout << format_edag(dag, spec_by_code(registry, dag.event_type));
    return 0;
  }
  if (a.doc_id.empty())
    throw ConfigError("inspect-edag: --doc-id is required with --pred/--labels");

  if (!a.pred.empty()) {
    for (const Prediction& p : read_predictions_jsonl(a.pred))
      if (p.doc_id == a.doc_id) {
        std::cout << "doc " << p.doc_id << " (" << p.decoder << ")\n";
        render_tables(registry, p.tables, a.type);
        return 0;
      }
    throw IoError("inspect-edag: doc_id '" + a.doc_id + "' not found in " + a.pred);
  }
  for (const LabeledDoc& l : read_labels_jsonl(a.labels, registry))
    if (l.doc.doc_id == a.doc_id) {
      std::cout << "doc " << l.doc.doc_id << " (gold labels)\n";
      render_tables(registry, l.tables, a.type);
      return 0;
    }
  throw IoError("inspect-edag: doc_id '" + a.doc_id + "' not found in " + a.labels);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-level event extraction pipeline (corpus generation, "
               "distant supervision, training, decoding, scoring)"};
  app.set_version_flag("--version", std::string("edag ") + EDAG_VERSION);
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic corpus + KB");
  gen->add_option("--out-dir", gen_args.out_dir, "Output directory")->required();
  gen->add_option("--schema", gen_args.schema, "builtin | synthetic | path");
  gen->add_option("--num-docs", gen_args.num_docs, "Documents to generate");
  gen->add_option("--seed", gen_args.seed, "Generator seed (default: EDAG_SEED or 1)");
  gen->add_option("--multi-ratio", gen_args.multi_ratio,
                  "Target fraction of multi-record documents");
  gen->add_option("--scatter", gen_args.scatter,
                  "Minimum sentences a record's arguments span");
  gen->add_option("--noise", gen_args.noise, "Distractor sentences per content sentence");

  LabelArgs label_args;
  CLI::App* label = app.add_subcommand("label", "Distant-supervision labeling");
  label->add_option("--docs", label_args.docs, "Corpus docs.jsonl")->required();
  label->add_option("--kb", label_args.kb, "Knowledge base kb.jsonl")->required();
  label->add_option("--out", label_args.out, "Output labels.jsonl")->required();
  label->add_option("--schema", label_args.schema, "builtin | synthetic | path");
  label->add_flag("--quality", label_args.quality,
                  "Score the labels against the KB and print the report");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the extraction model");
  train_cmd->add_option("--docs", train_args.docs, "Corpus docs.jsonl")->required();
  train_cmd->add_option("--labels", train_args.labels, "labels.jsonl")->required();
  train_cmd->add_option("--out-dir", train_args.out_dir, "Run directory")->required();
  train_cmd->add_option("--dev-docs", train_args.dev_docs, "Held-out docs.jsonl");
  train_cmd->add_option("--dev-labels", train_args.dev_labels, "Held-out labels.jsonl");
  train_cmd->add_option("--dev-fraction", train_args.dev_fraction,
                        "Tail fraction held out when no --dev-docs given");
  train_cmd->add_option("--schema", train_args.schema, "builtin | synthetic | path");
  train_cmd->add_option("--config", train_args.config_file, "key = value config file");
  train_cmd->add_option("--set", train_args.sets, "Override one config key (key=value)");
  train_cmd->add_option("--seed", train_args.seed, "Override the training seed");
  train_cmd->add_option("--threads", train_args.threads, "Worker thread cap");

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Decode event tables");
  predict->add_option("--docs", predict_args.docs, "Corpus docs.jsonl")->required();
  predict->add_option("--checkpoint", predict_args.checkpoint, "Trained best.ckpt")
      ->required();
  predict->add_option("--out", predict_args.out, "Output predictions.jsonl")->required();
  predict->add_option("--decoder", predict_args.decoder,
                      "doc2edag | greedy | dcfee-o | dcfee-m")
      ->check(CLI::IsMember({"doc2edag", "greedy", "dcfee-o", "dcfee-m"}));
  predict->add_option("--schema", predict_args.schema,
                      "Optional compatibility check against the checkpoint");
  predict->add_option("--threads", predict_args.threads, "Worker thread cap");
  predict->add_option("--trigger-threshold", predict_args.trigger_threshold,
                      "Trigger probability gate (default: checkpoint value)");
  predict->add_option("--expand-threshold", predict_args.expand_threshold,
                      "Path expansion gate (default: checkpoint value)");
  predict->add_option("--frontier-cap", predict_args.frontier_cap,
                      "Decode frontier cap (default: checkpoint value)");
  predict->add_option("--key-threshold", predict_args.key_threshold,
                      "Key-sentence gate for the dcfee decoders");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against labels");
  eval_cmd->add_option("--pred", eval_args.pred, "predictions.jsonl")->required();
  eval_cmd->add_option("--labels", eval_args.labels, "Gold labels.jsonl")->required();
  eval_cmd->add_option("--schema", eval_args.schema, "builtin | synthetic | path");
  eval_cmd->add_option("--out", eval_args.out, "Also write the report as JSON");

  InspectArgs inspect_args;
  CLI::App* inspect = app.add_subcommand("inspect-edag", "Render entity DAGs as trees");
  inspect->add_option("--edag", inspect_args.edag_json, "A single EDAG JSON file");
  inspect->add_option("--pred", inspect_args.pred, "predictions.jsonl");
  inspect->add_option("--labels", inspect_args.labels, "labels.jsonl");
  inspect->add_option("--doc-id", inspect_args.doc_id, "Document to render");
  inspect->add_option("--type", inspect_args.type, "Restrict to one event type");
  inspect->add_option("--schema", inspect_args.schema, "builtin | synthetic | path");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen(gen_args);
    if (label->parsed()) return run_label(label_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (predict->parsed()) return run_predict(predict_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (inspect->parsed()) return run_inspect(inspect_args);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error (schema): " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "error (shape): " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 5;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 7;
  }
}
