#include "edag/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "edag/edag.hpp"
#include "edag/errors.hpp"

namespace edag {

namespace {

// Document-level token position of each sentence's midpoint.
std::vector<double> sentence_midpoints(const Document& doc) {
  std::vector<double> mid;
  mid.reserve(doc.sentences.size());
  double offset = 0;
  for (const auto& s : doc.sentences) {
    mid.push_back(offset + double(s.size()) / 2.0);
    offset += double(s.size());
  }
  return mid;
}

// Occurrences of one (type, role), closest-to-the-key-sentence first:
// distance between sentence midpoints, then sentence index, then span.
std::vector<const TaggedMention*> ranked_occurrences(
    const std::vector<TaggedMention>& mentions, const std::vector<double>& midpoints,
    int spec_idx, int role_idx, int key_sent) {
  std::vector<const TaggedMention*> out;
  for (const auto& tm : mentions)
    if (tm.spec_idx == spec_idx && tm.role_idx == role_idx) out.push_back(&tm);
  const double key_mid = midpoints[static_cast<size_t>(key_sent)];
  std::stable_sort(out.begin(), out.end(),
                   [&](const TaggedMention* a, const TaggedMention* b) {
                     const double da =
                         std::abs(midpoints[static_cast<size_t>(a->mention.sent_idx)] - key_mid);
                     const double db =
                         std::abs(midpoints[static_cast<size_t>(b->mention.sent_idx)] - key_mid);
                     if (da != db) return da < db;
                     if (a->mention.sent_idx != b->mention.sent_idx)
                       return a->mention.sent_idx < b->mention.sent_idx;
                     if (a->mention.begin != b->mention.begin)
                       return a->mention.begin < b->mention.begin;
                     return a->mention.end < b->mention.end;
                   });
  return out;
}

// The k records grown around one key sentence. force_single caps k at 1.
std::vector<EventRecord> records_around_key_sentence(
    const SchemaRegistry& registry, const Document& doc,
    const std::vector<TaggedMention>& mentions, int spec_idx, int key_sent,
    bool force_single) {
  const EventTypeSpec& spec = registry.specs[static_cast<size_t>(spec_idx)];
  const std::vector<double> midpoints = sentence_midpoints(doc);

  int k = 1;
  if (!force_single) {
    for (size_t r = 0; r < spec.roles.size(); ++r) {
      int in_key = 0;
      for (const auto& tm : mentions)
        if (tm.spec_idx == spec_idx && tm.role_idx == static_cast<int>(r) &&
            tm.mention.sent_idx == key_sent)
          ++in_key;
      k = std::max(k, in_key);
    }
  }

  std::vector<EventRecord> records(static_cast<size_t>(k));
  for (auto& rec : records) rec.event_type = spec.code;
  for (size_t r = 0; r < spec.roles.size(); ++r) {
    const auto ranked = ranked_occurrences(mentions, midpoints, spec_idx,
                                           static_cast<int>(r), key_sent);
    for (int j = 0; j < k; ++j) {
      const std::string& role = spec.roles[r].name;
      if (ranked.empty())
        records[static_cast<size_t>(j)].args[role] = std::nullopt;
      else if (ranked.size() == 1)  // a lone argument is shared by every record
        records[static_cast<size_t>(j)].args[role] = ranked[0]->mention.surface;
      else if (j < static_cast<int>(ranked.size()))
        records[static_cast<size_t>(j)].args[role] =
            ranked[static_cast<size_t>(j)]->mention.surface;
      else
        records[static_cast<size_t>(j)].args[role] = std::nullopt;
    }
  }
  return records;
}

Prediction dcfee_decode(const SchemaRegistry& registry, const Document& doc,
                        const std::vector<TaggedMention>& mentions,
                        const std::map<std::string, double>& trigger_probs,
                        const std::vector<std::vector<double>>& key_probs,
                        double key_threshold, bool force_single, const char* name) {
  if (key_probs.size() != registry.specs.size())
    throw ShapeError("dcfee: " + std::to_string(key_probs.size()) +
                     " key probability rows for " + std::to_string(registry.specs.size()) +
                     " event types");
  Prediction out;
  out.doc_id = doc.doc_id;
  out.decoder = name;
  out.triggered = trigger_probs;
  for (size_t t = 0; t < registry.specs.size(); ++t) {
    if (static_cast<int>(key_probs[t].size()) != doc.num_sentences())
      throw ShapeError("dcfee: " + std::to_string(key_probs[t].size()) +
                       " key probabilities for " + std::to_string(doc.num_sentences()) +
                       " sentences");
    std::vector<EventRecord> records;
    for (int s = 0; s < doc.num_sentences(); ++s) {
      if (key_probs[t][static_cast<size_t>(s)] < key_threshold) continue;
      auto grown = records_around_key_sentence(registry, doc, mentions,
                                               static_cast<int>(t), s, force_single);
      records.insert(records.end(), grown.begin(), grown.end());
    }
    if (!records.empty())
      out.tables[registry.specs[t].code] = canonicalize(records, registry.specs[t]);
  }
  return out;
}

}  // namespace

std::map<std::string, int> derive_key_sentence_labels(const LabeledDoc& labeled,
                                                      const SchemaRegistry& registry) {
  const auto tagged = tagged_mentions_from_tags(labeled.doc, labeled.tags, registry);
  std::map<std::string, int> out;
  for (size_t t = 0; t < registry.specs.size(); ++t) {
    const std::string& code = registry.specs[t].code;
    auto trig = labeled.triggered.find(code);
    if (trig == labeled.triggered.end() || !trig->second) continue;
    std::vector<int> hits(static_cast<size_t>(labeled.doc.num_sentences()), 0);
    for (const auto& tm : tagged)
      if (tm.spec_idx == static_cast<int>(t))
        ++hits[static_cast<size_t>(tm.mention.sent_idx)];
    int best = -1, best_hits = 0;
    for (int s = 0; s < labeled.doc.num_sentences(); ++s)
      if (hits[static_cast<size_t>(s)] > best_hits) {
        best = s;
        best_hits = hits[static_cast<size_t>(s)];
      }
    if (best >= 0) out[code] = best;
  }
  return out;
}

Prediction greedy_decode(const SchemaRegistry& registry, const Document& doc,
                         const std::vector<TaggedMention>& mentions,
                         const std::map<std::string, double>& trigger_probs,
                         double trigger_threshold) {
  Prediction out;
  out.doc_id = doc.doc_id;
  out.decoder = "greedy";
  out.triggered = trigger_probs;
  for (size_t t = 0; t < registry.specs.size(); ++t) {
    const EventTypeSpec& spec = registry.specs[t];
    auto it = trigger_probs.find(spec.code);
    if (it == trigger_probs.end() || it->second < trigger_threshold) continue;
    EventRecord rec;
    rec.event_type = spec.code;
    for (size_t r = 0; r < spec.roles.size(); ++r) {
      rec.args[spec.roles[r].name] = std::nullopt;
      for (const auto& tm : mentions)  // mentions arrive in document order
        if (tm.spec_idx == static_cast<int>(t) && tm.role_idx == static_cast<int>(r)) {
          rec.args[spec.roles[r].name] = tm.mention.surface;
          break;
        }
    }
    out.tables[spec.code] = {rec};
  }
  return out;
}

Prediction dcfee_o_decode(const SchemaRegistry& registry, const Document& doc,
                          const std::vector<TaggedMention>& mentions,
                          const std::map<std::string, double>& trigger_probs,
                          const std::vector<std::vector<double>>& key_probs,
                          double key_threshold) {
  return dcfee_decode(registry, doc, mentions, trigger_probs, key_probs, key_threshold,
                      true, "dcfee-o");
}

Prediction dcfee_m_decode(const SchemaRegistry& registry, const Document& doc,
                          const std::vector<TaggedMention>& mentions,
                          const std::map<std::string, double>& trigger_probs,
                          const std::vector<std::vector<double>>& key_probs,
                          double key_threshold) {
  return dcfee_decode(registry, doc, mentions, trigger_probs, key_probs, key_threshold,
                      false, "dcfee-m");
}

}  // namespace edag
