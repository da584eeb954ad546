#pragma once

#include <map>
#include <string>
#include <vector>

#include "edag/corpus.hpp"
#include "edag/labeling.hpp"
#include "edag/schema.hpp"
#include "edag/serialization.hpp"

namespace edag {

// Per (document, event type): the index of the sentence containing the most
// argument spans of that type (ties to the smallest index). Types that are
// not triggered, or whose spans all vanished, get no entry. This is the
// supervision target of the per-type key-sentence heads.
std::map<std::string, int> derive_key_sentence_labels(const LabeledDoc& labeled,
                                                      const SchemaRegistry& registry);

// Fills one record per triggered type: each role takes the first entity in
// document order whose BIO tag names that (type, role), else NA. By design
// it cannot express more than one record per type.
Prediction greedy_decode(const SchemaRegistry& registry, const Document& doc,
                         const std::vector<TaggedMention>& mentions,
                         const std::map<std::string, double>& trigger_probs,
                         double trigger_threshold = 0.5);

// One record per predicted key sentence (key probability >= threshold):
// roles are filled from role-compatible entities inside that sentence, and
// missing roles are completed by the nearest occurrence elsewhere, ranked by
// token distance between sentence midpoints with earlier sentences winning
// ties. Types with no predicted key sentence produce no table.
Prediction dcfee_o_decode(const SchemaRegistry& registry, const Document& doc,
                          const std::vector<TaggedMention>& mentions,
                          const std::map<std::string, double>& trigger_probs,
                          const std::vector<std::vector<double>>& key_probs,
                          double key_threshold = 0.5);

// Multi-record variant: the role with the most occurrences inside the key
// sentence sets the record count k; each role's occurrences are ranked by
// the same distance order, record j taking the j-th occurrence (single
// occurrences are shared by every record, exhausted roles pad with NA).
// With k = 1 the output equals dcfee_o_decode by construction.
Prediction dcfee_m_decode(const SchemaRegistry& registry, const Document& doc,
                          const std::vector<TaggedMention>& mentions,
                          const std::map<std::string, double>& trigger_probs,
                          const std::vector<std::vector<double>>& key_probs,
                          double key_threshold = 0.5);

}  // namespace edag
