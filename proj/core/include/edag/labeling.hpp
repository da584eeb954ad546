#pragma once

#include <map>
#include <string>
#include <vector>

#include "edag/corpus.hpp"
#include "edag/eval.hpp"
#include "edag/schema.hpp"

namespace edag {

// Where each argument of a record shows up in the text.
struct MatchResult {
  EventRecord record;
  std::map<std::string, std::vector<EntityMention>> arg_spans;
  int matched_count = 0;  // roles with at least one span
};

// A document plus its distant-supervision labels: token-level BIO tags and
// the retained event tables. No trigger words anywhere.
struct LabeledDoc {
  Document doc;
  std::vector<std::vector<int>> tags;  // tag ids, aligned with doc.sentences
  std::map<std::string, std::vector<EventRecord>> tables;
  std::map<std::string, bool> triggered;
  int tag_conflicts = 0;  // spans dropped because another span claimed a token

  int gold_record_count() const;
};

// All exact substring occurrences of each non-empty argument, including
// overlapping ones, in every sentence.
MatchResult match_record(const Document& doc, const EventRecord& record,
                         const EventTypeSpec& spec);

// All occurrences of a surface string (helper shared with baselines).
std::vector<EntityMention> find_occurrences(const Document& doc,
                                            const std::string& surface);

// Matches every KB record against the document, keeps those whose matched
// arguments satisfy the key-role and threshold constraints, and writes BIO
// tags for the retained records' spans. Unmatched arguments of retained
// records are blanked to NA so labels never reference invisible text.
// Overlapping span claims are resolved deterministically: longer span
// first, then earlier record, sentence, offset, tag.
LabeledDoc label_document(const Document& doc,
                          const std::vector<EventRecord>& kb_records,
                          const SchemaRegistry& registry);

// A recognized mention together with the (event type, role) its BIO tag
// named. The role-blind Doc2EDAG decoder ignores the tag identity; the
// role-driven baseline decoders depend on it.
struct TaggedMention {
  EntityMention mention;
  int spec_idx = -1;
  int role_idx = -1;
};

// Maximal B..I tag runs converted back to entity mentions, with surfaces
// read off the document tokens. Shared by training (gold mentions) and
// inference (recognized mentions).
std::vector<TaggedMention> tagged_mentions_from_tags(
    const Document& doc, const std::vector<std::vector<int>>& tags,
    const SchemaRegistry& registry);

// Same spans with the tag identity dropped.
std::vector<EntityMention> mentions_from_tags(
    const Document& doc, const std::vector<std::vector<int>>& tags,
    const SchemaRegistry& registry);

// Scores the distant-supervision tables against the source knowledge base
// with the table-filling metric (labels as prediction, KB as gold).
EvalReport labeling_quality(const std::vector<LabeledDoc>& labeled,
                            const KnowledgeBase& truth,
                            const SchemaRegistry& registry);

}  // namespace edag
