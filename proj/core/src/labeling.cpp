#include "edag/labeling.hpp"

#include <algorithm>

#include "edag/errors.hpp"

namespace edag {

int LabeledDoc::gold_record_count() const {
  int n = 0;
  for (const auto& [type, records] : tables) n += static_cast<int>(records.size());
  return n;
}

std::vector<EntityMention> find_occurrences(const Document& doc,
                                            const std::string& surface) {
  std::vector<EntityMention> out;
  std::vector<char32_t> needle = tokenize(surface);
  if (needle.empty()) return out;
  for (int s = 0; s < doc.num_sentences(); ++s) {
    const auto& hay = doc.sentences[s];
    if (hay.size() < needle.size()) continue;
    for (size_t i = 0; i + needle.size() <= hay.size(); ++i) {
      if (std::equal(needle.begin(), needle.end(), hay.begin() + i))
        out.push_back({s, static_cast<int>(i),
                       static_cast<int>(i + needle.size()), surface});
    }
  }
  return out;
}

MatchResult match_record(const Document& doc, const EventRecord& record,
                         const EventTypeSpec& spec) {
  if (record.event_type != spec.code)
    throw SchemaError("record type " + record.event_type +
                      " matched against spec " + spec.code);
  MatchResult result;
  result.record = record;
  for (const auto& role : spec.roles) {
    const std::string* value = record.arg(role.name);
    if (!value) continue;
    auto spans = find_occurrences(doc, *value);
    if (!spans.empty()) {
      result.arg_spans[role.name] = std::move(spans);
      ++result.matched_count;
    }
  }
  return result;
}

namespace {

// One span's request to tag its tokens with a role's B/I tags.
struct SpanClaim {
  EntityMention span;
  int b_tag;
  int i_tag;
  int record_idx;
};

}  // namespace

LabeledDoc label_document(const Document& doc,
                          const std::vector<EventRecord>& kb_records,
                          const SchemaRegistry& registry) {
  LabeledDoc out;
  out.doc = doc;
  out.tags.resize(doc.num_sentences());
  for (int s = 0; s < doc.num_sentences(); ++s)
    out.tags[s].assign(doc.sentences[s].size(), 0);

  std::vector<SpanClaim> claims;
  for (size_t r = 0; r < kb_records.size(); ++r) {
    const auto& record = kb_records[r];
    int spec_idx = registry.spec_index(record.event_type);
    if (spec_idx < 0)
      throw SchemaError("KB record with unknown event type " + record.event_type);
    const EventTypeSpec& spec = registry.specs[spec_idx];
    MatchResult match = match_record(doc, record, spec);

    // Retention = the validity constraints applied to what actually matched.
    EventRecord visible;
    visible.event_type = record.event_type;
    for (const auto& role : spec.roles) {
      auto it = match.arg_spans.find(role.name);
      if (it != match.arg_spans.end())
        visible.args[role.name] = *record.arg(role.name);
      else
        visible.args[role.name] = std::nullopt;
    }
    if (!validate_record(visible, spec)) continue;

    out.tables[spec.code].push_back(std::move(visible));
    for (const auto& role : spec.roles) {
      auto it = match.arg_spans.find(role.name);
      if (it == match.arg_spans.end()) continue;
      for (const auto& span : it->second)
        claims.push_back({span, spec.find_role(role.name)->b_tag,
                          spec.find_role(role.name)->i_tag,
                          static_cast<int>(r)});
    }
  }

  std::stable_sort(claims.begin(), claims.end(), [](const SpanClaim& a,
                                                    const SpanClaim& b) {
    int la = a.span.end - a.span.begin;
    int lb = b.span.end - b.span.begin;
    if (la != lb) return la > lb;
    if (a.record_idx != b.record_idx) return a.record_idx < b.record_idx;
    if (a.span.sent_idx != b.span.sent_idx) return a.span.sent_idx < b.span.sent_idx;
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    return a.b_tag < b.b_tag;
  });

  for (const auto& claim : claims) {
    auto& tags = out.tags[claim.span.sent_idx];
    bool free = true;
    bool already_same = true;
    for (int i = claim.span.begin; i < claim.span.end; ++i) {
      int want = i == claim.span.begin ? claim.b_tag : claim.i_tag;
      if (tags[i] != 0) free = false;
      if (tags[i] != want) already_same = false;
    }
    if (free) {
      for (int i = claim.span.begin; i < claim.span.end; ++i)
        tags[i] = i == claim.span.begin ? claim.b_tag : claim.i_tag;
    } else if (!already_same) {
      ++out.tag_conflicts;
    }
  }

  for (const auto& spec : registry.specs)
    out.triggered[spec.code] = out.tables.count(spec.code) > 0;
  return out;
}

std::vector<TaggedMention> tagged_mentions_from_tags(
    const Document& doc, const std::vector<std::vector<int>>& tags,
    const SchemaRegistry& registry) {
  if (static_cast<int>(tags.size()) != doc.num_sentences())
    throw SchemaError("mentions_from_tags: " + std::to_string(tags.size()) +
                      " tag rows for " + std::to_string(doc.num_sentences()) +
                      " sentences");
  std::vector<TaggedMention> out;
  for (int s = 0; s < doc.num_sentences(); ++s) {
    const auto& row = tags[s];
    if (row.size() != doc.sentences[s].size())
      throw SchemaError("mentions_from_tags: tag row " + std::to_string(s) +
                        " does not cover its sentence");
    size_t i = 0;
    while (i < row.size()) {
      auto info = tag_info(registry, row[i]);
      if (!info) {
        ++i;
        continue;
      }
      // A span runs from this tag through the following I tags of the same
      // role; a stray I without its B still opens a span, for robustness.
      const int i_tag = info->begin ? row[i] + 1 : row[i];
      size_t end = i + 1;
      while (end < row.size() && row[end] == i_tag) ++end;
      std::vector<char32_t> covered(doc.sentences[s].begin() + i,
                                    doc.sentences[s].begin() + end);
      out.push_back({{s, static_cast<int>(i), static_cast<int>(end),
                      detokenize(covered)},
                     info->spec_idx,
                     info->role_idx});
      i = end;
    }
  }
  return out;
}

std::vector<EntityMention> mentions_from_tags(
    const Document& doc, const std::vector<std::vector<int>>& tags,
    const SchemaRegistry& registry) {
  std::vector<EntityMention> out;
  for (auto& tagged : tagged_mentions_from_tags(doc, tags, registry))
    out.push_back(std::move(tagged.mention));
  return out;
}

EvalReport labeling_quality(const std::vector<LabeledDoc>& labeled,
                            const KnowledgeBase& truth,
                            const SchemaRegistry& registry) {
  TableSet pred, gold;
  for (const auto& doc : labeled) pred[doc.doc.doc_id] = doc.tables;
  for (const auto& [doc_id, records] : truth.records) {
    auto& tables = gold[doc_id];
    for (const auto& record : records) tables[record.event_type].push_back(record);
  }
  return evaluate_tables(pred, gold, registry);
}

}  // namespace edag
