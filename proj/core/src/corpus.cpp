#include "edag/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "edag/errors.hpp"
#include "edag/rng.hpp"

namespace edag {

std::vector<char32_t> tokenize(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  size_t i = 0;
  auto fail = [&] { throw IoError("invalid UTF-8 at byte " + std::to_string(i)); };
  while (i < text.size()) {
    unsigned char b0 = text[i];
    int extra;
    char32_t cp;
    if (b0 < 0x80) {
      extra = 0;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      fail();
      return out;
    }
    if (i + extra >= text.size()) fail();
    for (int k = 1; k <= extra; ++k) {
      unsigned char b = text[i + k];
      if ((b & 0xC0) != 0x80) fail();
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::string detokenize(const std::vector<char32_t>& tokens) {
  std::string out;
  for (char32_t cp : tokens) out += encode_utf8(cp);
  return out;
}

Document make_document(std::string doc_id, std::vector<std::string> sentences) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  for (auto& s : sentences) {
    if (s.empty()) continue;  // empty sentences carry no tokens
    doc.sentences.push_back(tokenize(s));
    doc.raw_sentences.push_back(std::move(s));
  }
  if (doc.sentences.empty()) throw Error("document has no non-empty sentences");
  return doc;
}

TruncateReport truncate(const Document& doc, int max_sents, int max_len,
                        const std::vector<EntityMention>& mentions) {
  if (max_sents < 1 || max_len < 1) throw Error("truncate limits must be >= 1");
  TruncateReport report;
  report.doc.doc_id = doc.doc_id;
  int keep = std::min<int>(max_sents, doc.num_sentences());
  report.dropped_sentences = doc.num_sentences() - keep;
  for (int i = 0; i < keep; ++i) {
    auto tokens = doc.sentences[i];
    if (static_cast<int>(tokens.size()) > max_len) {
      tokens.resize(max_len);
      ++report.clipped_sentences;
    }
    report.doc.sentences.push_back(tokens);
    report.doc.raw_sentences.push_back(detokenize(tokens));
  }
  for (const auto& m : mentions) {
    if (m.sent_idx >= keep || m.end > max_len) report.lost_mentions.push_back(m);
  }
  return report;
}

Lexicons default_lexicons() {
  // Words are chosen so that no pool entry is a substring of another and
  // person/company surfaces can never collide.
  Lexicons lex;
  lex.person_first = {"ALICE", "BORIS", "CARLA", "DEREK", "ELENA",
                      "FELIX", "GRETA", "HARVEY", "IRENE", "JONAS"};
  lex.person_last = {"STONE", "MALIK", "ORTEGA", "PETROV", "QUINN",
                     "ROSSI", "SINGH", "TANAKA", "UPTON", "VANCE"};
  lex.company_first = {"NORTH", "SOUTH", "DELTA", "CREST", "HARBOR", "SUMMIT"};
  lex.company_last = {"GROUP", "CAPITAL", "TRUST", "PARTNERS", "HOLDCO", "LOGISTICS"};
  return lex;
}

RoleKind role_kind(std::string_view role_name) {
  auto contains = [&](std::string_view needle) {
    return role_name.find(needle) != std::string_view::npos;
  };
  if (contains("Ratio")) return RoleKind::Ratio;
  if (contains("Price") || contains("Amount")) return RoleKind::Price;
  if (contains("Date")) return RoleKind::Date;
  if (contains("Shares")) return RoleKind::Shares;
  if (contains("Company") || contains("Institution") || contains("Pledgee"))
    return RoleKind::Company;
  return RoleKind::Person;
}

namespace {

std::string pad2(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

// Draws entity surface strings, rejecting any value that is a substring of
// (or contains) a value already used in the current document, so exact
// matching recovers the ground truth without collisions.
class ValuePool {
 public:
  ValuePool(Rng& rng, const Lexicons& lex) : rng_(rng), lex_(lex) {}

  std::string draw(RoleKind kind) {
    for (int attempt = 0; attempt < 1024; ++attempt) {
      std::string v = sample(kind);
      if (!collides(v)) {
        used_.push_back(v);
        return v;
      }
    }
    throw Error("value pool exhausted; lexicons too small for this document");
  }

 private:
  bool collides(const std::string& v) const {
    for (const auto& u : used_)
      if (u.find(v) != std::string::npos || v.find(u) != std::string::npos)
        return true;
    return false;
  }

  std::string pick(const std::vector<std::string>& pool) {
    return pool[rng_.uniform_int(0, static_cast<int64_t>(pool.size()) - 1)];
  }

  std::string sample(RoleKind kind) {
    switch (kind) {
      case RoleKind::Person:
        return pick(lex_.person_first) + " " + pick(lex_.person_last);
      case RoleKind::Company:
        return pick(lex_.company_first) + " " + pick(lex_.company_last);
      case RoleKind::Date:
        return std::to_string(2015 + rng_.uniform_int(0, 8)) + "-" +
               pad2(static_cast<int>(rng_.uniform_int(1, 12))) + "-" +
               pad2(static_cast<int>(rng_.uniform_int(1, 28)));
      case RoleKind::Shares:
        return std::to_string(rng_.uniform_int(1000000, 9999999));
      case RoleKind::Price:
        return std::to_string(rng_.uniform_int(10, 99)) + "." +
               pad2(static_cast<int>(rng_.uniform_int(0, 99)));
      case RoleKind::Ratio:
        return std::to_string(rng_.uniform_int(10, 99)) + "." +
               pad2(static_cast<int>(rng_.uniform_int(0, 99))) + "%";
    }
    throw Error("unreachable role kind");
  }

  Rng& rng_;
  const Lexicons& lex_;
  std::vector<std::string> used_;
};

EventRecord sample_record(const EventTypeSpec& spec, Rng& rng, ValuePool& pool) {
  EventRecord record;
  record.event_type = spec.code;
  std::vector<bool> filled(spec.roles.size(), false);
  int count = 0;
  for (size_t j = 0; j < spec.roles.size(); ++j) {
    double p = std::clamp(0.95 - 0.12 * static_cast<double>(j), 0.4, 0.95);
    if (spec.roles[j].is_key || rng.bernoulli(p)) {
      filled[j] = true;
      ++count;
    }
  }
  // Top up in declaration order so the record clears the matching threshold.
  for (size_t j = 0; count < spec.min_matched_roles && j < spec.roles.size(); ++j) {
    if (!filled[j]) {
      filled[j] = true;
      ++count;
    }
  }
  for (size_t j = 0; j < spec.roles.size(); ++j) {
    const auto& role = spec.roles[j];
    if (filled[j])
      record.args[role.name] = pool.draw(role_kind(role.name));
    else
      record.args[role.name] = std::nullopt;
  }
  return record;
}

constexpr int kMaxSentenceChars = 46;

// Packs "Role: value" clauses into sentences, spreading them over at least
// min_sentences sentences (argument scattering).
std::vector<std::string> pack_clauses(const std::vector<std::string>& clauses,
                                      int min_sentences) {
  std::vector<std::string> sentences;
  if (clauses.empty()) return sentences;
  int target = std::min<int>(min_sentences, static_cast<int>(clauses.size()));
  target = std::max(target, 1);
  int per_sentence =
      (static_cast<int>(clauses.size()) + target - 1) / target;
  std::string cur;
  int cur_count = 0;
  auto flush = [&] {
    if (!cur.empty()) {
      sentences.push_back(cur + ".");
      cur.clear();
      cur_count = 0;
    }
  };
  for (const auto& clause : clauses) {
    bool fits = cur.empty() ||
                (cur_count < per_sentence &&
                 static_cast<int>(cur.size() + 2 + clause.size()) + 1 <=
                     kMaxSentenceChars);
    if (!fits) flush();
    cur += cur.empty() ? clause : "; " + clause;
    ++cur_count;
  }
  flush();
  return sentences;
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::string* first_filled_shares_role(const EventTypeSpec& spec,
                                            const EventRecord& record) {
  for (const auto& role : spec.roles) {
    if (role_kind(role.name) == RoleKind::Shares && record.has_arg(role.name))
      return &role.name;
  }
  return nullptr;
}

}  // namespace

Corpus generate_corpus(const GeneratorConfig& cfg, const SchemaRegistry& registry) {
  if (cfg.num_docs < 1) throw ConfigError("num_docs must be >= 1");
  if (cfg.multi_event_ratio < 0 || cfg.multi_event_ratio > 1)
    throw ConfigError("multi_event_ratio must be in [0, 1]");
  if (cfg.noise < 0 || cfg.noise > 1)
    throw ConfigError("noise must be in [0, 1]");
  if (cfg.scatter_degree < 1) throw ConfigError("scatter_degree must be >= 1");
  const auto& lex = cfg.vocabulary;
  if (lex.person_first.empty() || lex.person_last.empty() ||
      lex.company_first.empty() || lex.company_last.empty())
    throw ConfigError("generator lexicons must be non-empty");

  std::vector<double> weights(registry.specs.size(), 1.0);
  if (!cfg.event_type_mix.empty()) {
    weights.assign(registry.specs.size(), 0.0);
    for (const auto& [code, w] : cfg.event_type_mix) {
      int idx = registry.spec_index(code);
      if (idx < 0) throw ConfigError("event_type_mix: unknown event type " + code);
      if (w < 0) throw ConfigError("event_type_mix: negative weight for " + code);
      weights[idx] = w;
    }
  }
  double total_weight = 0;
  for (double w : weights) total_weight += w;
  if (total_weight <= 0) throw ConfigError("event_type_mix has no positive weight");

  Rng rng(cfg.seed);
  Corpus corpus;
  for (int d = 0; d < cfg.num_docs; ++d) {
    std::string doc_id = "doc_";
    {
      std::string n = std::to_string(d);
      doc_id += std::string(n.size() < 6 ? 6 - n.size() : 0, '0') + n;
    }
    double pick = rng.uniform() * total_weight;
    size_t spec_idx = 0;
    for (; spec_idx + 1 < weights.size(); ++spec_idx) {
      pick -= weights[spec_idx];
      if (pick < 0) break;
    }
    const EventTypeSpec& spec = registry.specs[spec_idx];

    int n_records = 1;
    if (rng.bernoulli(cfg.multi_event_ratio))
      n_records = rng.uniform() < 0.3 ? 3 : 2;

    ValuePool pool(rng, lex);
    std::vector<EventRecord> records;
    for (int k = 0; k < n_records; ++k)
      records.push_back(sample_record(spec, rng, pool));

    std::vector<std::string> sentences;
    sentences.push_back("Report: " + lowercase(spec.name) + ".");
    for (const auto& record : records) {
      const std::string* stale_role = nullptr;
      std::string stale_value;
      if (rng.bernoulli(0.25)) {
        stale_role = first_filled_shares_role(spec, record);
        if (stale_role) stale_value = pool.draw(RoleKind::Shares);
      }
      std::vector<std::string> clauses;
      for (const auto& role : spec.roles) {
        const std::string* value = record.arg(role.name);
        if (!value) continue;
        if (stale_role && role.name == *stale_role) continue;
        clauses.push_back(role.name + ": " + *value);
      }
      if (stale_role)
        sentences.push_back("Earlier note said " + *stale_role + ": " +
                            stale_value + ".");
      for (auto& s : pack_clauses(clauses, cfg.scatter_degree))
        sentences.push_back(std::move(s));
      if (stale_role)
        sentences.push_back("Correction: " + *stale_role + ": " +
                            *record.arg(*stale_role) + ".");
    }

    // Summary repeats a share count for single-record documents (the same
    // entity then has two mentions); multi-record totals are fresh values.
    std::string summary_value;
    if (n_records == 1) {
      const std::string* shares = first_filled_shares_role(spec, records[0]);
      if (shares) summary_value = *records[0].arg(*shares);
    }
    if (summary_value.empty()) summary_value = pool.draw(RoleKind::Shares);
    sentences.push_back("In total, " + summary_value + " shares changed hands.");

    if (cfg.noise > 0) {
      std::vector<std::string> with_noise;
      int injected = 0;
      for (size_t i = 0; i < sentences.size(); ++i) {
        with_noise.push_back(std::move(sentences[i]));
        if (i == 0 || injected >= 2 || !rng.bernoulli(cfg.noise)) continue;
        switch (injected % 2) {
          case 0:
            with_noise.push_back("Advisor: " + pool.draw(RoleKind::Person) + ".");
            break;
          default:
            with_noise.push_back("Observer: " + pool.draw(RoleKind::Company) + ".");
            break;
        }
        ++injected;
      }
      sentences = std::move(with_noise);
    }

    corpus.docs.push_back(make_document(doc_id, std::move(sentences)));
    corpus.kb.records[doc_id] = std::move(records);
  }
  return corpus;
}

}  // namespace edag
