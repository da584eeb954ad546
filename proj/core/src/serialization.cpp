#include "edag/serialization.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "edag/errors.hpp"

namespace edag {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

// Parses one JSONL line, annotating errors with file position.
json parse_line(const std::string& line, const std::string& path, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

json record_to_json(const EventRecord& record) {
  json j;
  j["event_type"] = record.event_type;
  j["args"] = json::object();
  for (const auto& [role, value] : record.args) {
    if (value)
      j["args"][role] = *value;
    else
      j["args"][role] = nullptr;
  }
  return j;
}

EventRecord record_from_json(const json& j) {
  EventRecord record;
  record.event_type = j.at("event_type").get<std::string>();
  for (const auto& [role, value] : j.at("args").items()) {
    if (value.is_null())
      record.args[role] = std::nullopt;
    else
      record.args[role] = value.get<std::string>();
  }
  return record;
}

json tables_to_json(const std::map<std::string, std::vector<EventRecord>>& tables) {
  json j = json::object();
  for (const auto& [type, records] : tables) {
    json arr = json::array();
    for (const auto& record : records) arr.push_back(record_to_json(record));
    j[type] = std::move(arr);
  }
  return j;
}

std::map<std::string, std::vector<EventRecord>> tables_from_json(const json& j) {
  std::map<std::string, std::vector<EventRecord>> tables;
  for (const auto& [type, arr] : j.items()) {
    auto& records = tables[type];
    for (const auto& r : arr) records.push_back(record_from_json(r));
  }
  return tables;
}

}  // namespace

void write_docs_jsonl(const std::string& path, const std::vector<Document>& docs) {
  auto out = open_out(path);
  for (const auto& doc : docs) {
    json j;
    j["doc_id"] = doc.doc_id;
    j["sentences"] = doc.raw_sentences;
    out << j.dump() << "\n";
  }
}

std::vector<Document> read_docs_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    try {
      docs.push_back(make_document(j.at("doc_id").get<std::string>(),
                                   j.at("sentences").get<std::vector<std::string>>()));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

void write_kb_jsonl(const std::string& path, const KnowledgeBase& kb) {
  auto out = open_out(path);
  for (const auto& [doc_id, records] : kb.records) {
    json j;
    j["doc_id"] = doc_id;
    json arr = json::array();
    for (const auto& record : records) arr.push_back(record_to_json(record));
    j["records"] = std::move(arr);
    out << j.dump() << "\n";
  }
}

KnowledgeBase read_kb_jsonl(const std::string& path) {
  auto in = open_in(path);
  KnowledgeBase kb;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    try {
      auto& records = kb.records[j.at("doc_id").get<std::string>()];
      for (const auto& r : j.at("records")) records.push_back(record_from_json(r));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return kb;
}

void write_labels_jsonl(const std::string& path,
                        const std::vector<LabeledDoc>& labeled,
                        const SchemaRegistry& registry) {
  auto out = open_out(path);
  for (const auto& doc : labeled) {
    json j;
    j["doc_id"] = doc.doc.doc_id;
    json tag_rows = json::array();
    for (const auto& row : doc.tags) {
      json names = json::array();
      for (int tag : row) names.push_back(registry.tag_vocabulary.at(tag));
      tag_rows.push_back(std::move(names));
    }
    j["tags"] = std::move(tag_rows);
    j["tables"] = tables_to_json(doc.tables);
    j["triggered"] = doc.triggered;
    out << j.dump() << "\n";
  }
}

std::vector<LabeledDoc> read_labels_jsonl(const std::string& path,
                                          const SchemaRegistry& registry) {
  std::map<std::string, int> tag_ids;
  for (size_t i = 0; i < registry.tag_vocabulary.size(); ++i)
    tag_ids[registry.tag_vocabulary[i]] = static_cast<int>(i);
  auto in = open_in(path);
  std::vector<LabeledDoc> labeled;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    try {
      LabeledDoc doc;
      doc.doc.doc_id = j.at("doc_id").get<std::string>();
      for (const auto& row : j.at("tags")) {
        std::vector<int> ids;
        for (const auto& name : row) {
          auto it = tag_ids.find(name.get<std::string>());
          if (it == tag_ids.end())
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": tag not in schema: " + name.get<std::string>());
          ids.push_back(it->second);
        }
        doc.tags.push_back(std::move(ids));
      }
      doc.tables = tables_from_json(j.at("tables"));
      for (const auto& [type, flag] : j.at("triggered").items())
        doc.triggered[type] = flag.get<bool>();
      labeled.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labeled;
}

void write_predictions_jsonl(const std::string& path,
                             const std::vector<Prediction>& preds) {
  auto out = open_out(path);
  for (const auto& pred : preds) {
    json j;
    j["doc_id"] = pred.doc_id;
    j["decoder"] = pred.decoder;
    j["triggered"] = pred.triggered;
    j["tables"] = tables_to_json(pred.tables);
    j["diagnostics"] = {{"frontier_truncations", pred.frontier_truncations},
                        {"mention_mismatches", pred.mention_mismatches}};
    out << j.dump() << "\n";
  }
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<Prediction> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    try {
      Prediction pred;
      pred.doc_id = j.at("doc_id").get<std::string>();
      pred.decoder = j.value("decoder", "");
      for (const auto& [type, prob] : j.at("triggered").items())
        pred.triggered[type] = prob.get<double>();
      pred.tables = tables_from_json(j.at("tables"));
      if (j.contains("diagnostics")) {
        pred.frontier_truncations =
            j["diagnostics"].value("frontier_truncations", 0);
        pred.mention_mismatches =
            j["diagnostics"].value("mention_mismatches", 0);
      }
      preds.push_back(std::move(pred));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["tool_version"] = manifest.tool_version;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  j["input_digests"] = manifest.input_digests;
  j["timings_ms"] = manifest.timings_ms;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

}  // namespace edag
