#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edag/corpus.hpp"
#include "edag/labeling.hpp"
#include "edag/schema.hpp"

namespace edag {

// Corpus documents: one {doc_id, sentences:[string]} object per line.
void write_docs_jsonl(const std::string& path, const std::vector<Document>& docs);
std::vector<Document> read_docs_jsonl(const std::string& path);

// Knowledge base: one {doc_id, records:[{event_type, args:{role: str|null}}]}
// object per line.
void write_kb_jsonl(const std::string& path, const KnowledgeBase& kb);
KnowledgeBase read_kb_jsonl(const std::string& path);

// Distant-supervision labels: {doc_id, tags:[[string]], tables, triggered}.
// Reading restores tag ids through the registry's tag vocabulary; documents
// are not stored and must be re-joined from the corpus file.
void write_labels_jsonl(const std::string& path,
                        const std::vector<LabeledDoc>& labeled,
                        const SchemaRegistry& registry);
std::vector<LabeledDoc> read_labels_jsonl(const std::string& path,
                                          const SchemaRegistry& registry);

// Decoder output for one document.
struct Prediction {
  std::string doc_id;
  std::string decoder;
  std::map<std::string, double> triggered;  // type -> probability
  std::map<std::string, std::vector<EventRecord>> tables;
  int frontier_truncations = 0;
  int mention_mismatches = 0;
};

void write_predictions_jsonl(const std::string& path,
                             const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions_jsonl(const std::string& path);

// Everything needed to re-run a command: inputs, digests, resolved config.
struct RunManifest {
  std::string command;
  std::string tool_version;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> input_digests;  // path -> crc32 hex
  std::map<std::string, double> timings_ms;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace edag
