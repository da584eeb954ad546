#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "edag/schema.hpp"

namespace edag {

// Character-level tokenization: one token per unicode scalar value.
std::vector<char32_t> tokenize(std::string_view text);
std::string detokenize(const std::vector<char32_t>& tokens);
std::string encode_utf8(char32_t cp);

// A document is a sequence of sentences; tokens are single characters so
// entity matching never fights a word segmenter.
struct Document {
  std::string doc_id;
  std::vector<std::string> raw_sentences;
  std::vector<std::vector<char32_t>> sentences;

  int num_sentences() const { return static_cast<int>(sentences.size()); }
};

Document make_document(std::string doc_id, std::vector<std::string> sentences);

// A contiguous character span [begin, end) inside one sentence.
struct EntityMention {
  int sent_idx = 0;
  int begin = 0;
  int end = 0;
  std::string surface;

  bool operator==(const EntityMention&) const = default;
};

// Ground-truth event tables keyed by document.
struct KnowledgeBase {
  std::map<std::string, std::vector<EventRecord>> records;
};

// Clips a document to the first max_sents sentences and first max_len
// tokens per sentence; any of the given mentions that no longer fit are
// reported as lost.
struct TruncateReport {
  Document doc;
  int dropped_sentences = 0;
  int clipped_sentences = 0;
  std::vector<EntityMention> lost_mentions;
};
TruncateReport truncate(const Document& doc, int max_sents, int max_len,
                        const std::vector<EntityMention>& mentions = {});

// Entity string pools for the generator. Person/company surfaces are
// two-word combinations; dates, share counts, prices and ratios are
// rendered in fixed formats on demand.
struct Lexicons {
  std::vector<std::string> person_first;
  std::vector<std::string> person_last;
  std::vector<std::string> company_first;
  std::vector<std::string> company_last;
};
Lexicons default_lexicons();

struct GeneratorConfig {
  uint64_t seed = 1;
  int num_docs = 1;
  double multi_event_ratio = 0.29;  // target fraction of docs with >1 record
  int scatter_degree = 2;  // min distinct sentences a record's args span
  double noise = 0.1;      // distractor sentences per content sentence
  std::map<std::string, double> event_type_mix;  // code -> weight; empty = uniform
  Lexicons vocabulary = default_lexicons();
};

struct Corpus {
  std::vector<Document> docs;
  KnowledgeBase kb;
};

// Renders announcement-style documents whose ground-truth records are
// recoverable by exact string matching: every argument appears verbatim,
// values never collide as substrings within a document, and arguments of
// one record are scattered across multiple sentences. Deterministic in
// (cfg, registry).
Corpus generate_corpus(const GeneratorConfig& cfg, const SchemaRegistry& registry);

// Value family a role draws from, inferred from the role name.
enum class RoleKind { Person, Company, Date, Shares, Price, Ratio };
RoleKind role_kind(std::string_view role_name);

}  // namespace edag
