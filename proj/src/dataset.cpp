#include "dpn/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dpn/random.hpp"
#include "json.hpp"

namespace dpn {

using nlohmann::json;

std::vector<std::string> utf8_codepoints(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((b & 0x80) == 0x00) len = 1;
    else if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) { len = 1; break; }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename '" + tmp + "' -> '" + path + "': " + ec.message());
}

namespace {

// Sorts entities by (start, end), remaps triple indices, dedups triples, and
// enforces the Example invariants. `where` prefixes error messages.
void normalize_example(Example& ex, const std::string& where) {
  if (ex.tokens.empty())
    throw ValidationError(where + "empty token list");
  const Index l = static_cast<Index>(ex.tokens.size());
  const Index m = static_cast<Index>(ex.entities.size());
  for (const auto& e : ex.entities) {
    if (e.start < 0 || e.end <= e.start || e.end > l)
      throw ValidationError(where + "entity span [" + std::to_string(e.start) + ", " +
                            std::to_string(e.end) + ") out of range for " +
                            std::to_string(l) + " tokens");
    if (e.type.empty()) throw ValidationError(where + "entity with empty type");
  }
  for (const auto& t : ex.triples) {
    if (t.subject < 0 || t.subject >= m || t.object < 0 || t.object >= m)
      throw ValidationError(where + "triple references entity index " +
                            std::to_string(t.subject < 0 || t.subject >= m ? t.subject
                                                                           : t.object) +
                            " of " + std::to_string(m) + " entities");
    if (t.subject == t.object)
      throw ValidationError(where + "self-relation on entity " + std::to_string(t.subject));
    if (t.relation.empty()) throw ValidationError(where + "triple with empty relation");
  }

  std::vector<Index> perm(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    const auto& ea = ex.entities[static_cast<std::size_t>(a)];
    const auto& eb = ex.entities[static_cast<std::size_t>(b)];
    return std::tie(ea.start, ea.end) < std::tie(eb.start, eb.end);
  });
  std::vector<EntityMention> sorted;
  std::vector<Index> old_to_new(static_cast<std::size_t>(m));
  for (Index ni = 0; ni < m; ++ni) {
    sorted.push_back(ex.entities[static_cast<std::size_t>(perm[static_cast<std::size_t>(ni)])]);
    old_to_new[static_cast<std::size_t>(perm[static_cast<std::size_t>(ni)])] = ni;
  }
  for (Index i = 1; i < m; ++i)
    if (sorted[static_cast<std::size_t>(i)].start == sorted[static_cast<std::size_t>(i - 1)].start &&
        sorted[static_cast<std::size_t>(i)].end == sorted[static_cast<std::size_t>(i - 1)].end)
      throw ValidationError(where + "duplicate entity span [" +
                            std::to_string(sorted[static_cast<std::size_t>(i)].start) + ", " +
                            std::to_string(sorted[static_cast<std::size_t>(i)].end) + ")");
  ex.entities = std::move(sorted);

  std::set<Triple> dedup;
  for (const auto& t : ex.triples)
    dedup.insert({old_to_new[static_cast<std::size_t>(t.subject)], t.relation,
                  old_to_new[static_cast<std::size_t>(t.object)]});
  ex.triples.assign(dedup.begin(), dedup.end());
}

json example_to_json(const Example& ex) {
  json j;
  j["tokens"] = ex.tokens;
  j["entities"] = json::array();
  for (const auto& e : ex.entities)
    j["entities"].push_back({{"start", e.start}, {"end", e.end}, {"type", e.type}});
  j["triples"] = json::array();
  for (const auto& t : ex.triples)
    j["triples"].push_back(
        {{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}});
  if (!ex.pattern.empty()) j["pattern"] = ex.pattern;
  return j;
}

}  // namespace

std::vector<Example> load_corpus(const std::string& path, const Vocab* vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  std::vector<Example> out;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
    Example ex;
    try {
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& je : j.at("entities")) {
        EntityMention e;
        e.start = je.at("start").get<Index>();
        e.end = je.at("end").get<Index>();
        e.type = je.at("type").get<std::string>();
        ex.entities.push_back(std::move(e));
      }
      if (j.contains("triples")) {
        for (const auto& jt : j.at("triples")) {
          Triple t;
          t.subject = jt.at("subject").get<Index>();
          t.relation = jt.at("relation").get<std::string>();
          t.object = jt.at("object").get<Index>();
          ex.triples.push_back(std::move(t));
        }
      }
      if (j.contains("pattern")) ex.pattern = j.at("pattern").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
    normalize_example(ex, where);
    if (vocab)
      for (const auto& e : ex.entities)
        if (!vocab->type_to_id.count(e.type))
          throw ValidationError(where + "unknown entity type '" + e.type + "'");
    out.push_back(std::move(ex));
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ostringstream os;
  for (const auto& ex : examples) os << example_to_json(ex).dump() << '\n';
  atomic_write_file(path, os.str());
}

std::vector<Example> merge_shared_sentences(const std::vector<Example>& records) {
  std::vector<Example> out;
  std::map<std::string, std::size_t> by_key;
  for (const auto& rec : records) {
    std::string key;
    for (const auto& t : rec.tokens) {
      key += t;
      key += '\x1e';
    }
    auto [it, fresh] = by_key.emplace(key, out.size());
    if (fresh) {
      Example ex;
      ex.tokens = rec.tokens;
      out.push_back(std::move(ex));
    }
    Example& target = out[it->second];
    std::vector<Index> remap(rec.entities.size());
    for (std::size_t i = 0; i < rec.entities.size(); ++i) {
      const auto& e = rec.entities[i];
      Index found = -1;
      for (std::size_t k = 0; k < target.entities.size(); ++k) {
        if (target.entities[k].start == e.start && target.entities[k].end == e.end) {
          if (target.entities[k].type != e.type)
            throw ValidationError("merge conflict: span [" + std::to_string(e.start) +
                                  ", " + std::to_string(e.end) + ") typed '" +
                                  target.entities[k].type + "' and '" + e.type + "'");
          found = static_cast<Index>(k);
          break;
        }
      }
      if (found < 0) {
        found = static_cast<Index>(target.entities.size());
        target.entities.push_back(e);
      }
      remap[i] = found;
    }
    for (const auto& t : rec.triples)
      target.triples.push_back({remap[static_cast<std::size_t>(t.subject)], t.relation,
                                remap[static_cast<std::size_t>(t.object)]});
  }
  for (auto& ex : out) normalize_example(ex, "merge: ");
  return out;
}

PointerTargets compute_pointer_targets(const Example& ex) {
  const Index m = static_cast<Index>(ex.entities.size());
  PointerTargets targets;
  targets.forward.assign(static_cast<std::size_t>(m), PointerSlot{});
  targets.backward.assign(static_cast<std::size_t>(m), PointerSlot{});
  if (ex.triples.empty()) {
    targets.coverage = 1.0;
    return targets;
  }
  std::vector<Triple> order = ex.triples;
  std::sort(order.begin(), order.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.subject, a.object, a.relation) <
           std::tie(b.subject, b.object, b.relation);
  });
  Index covered = 0;
  for (const auto& t : order) {
    auto& fwd = targets.forward[static_cast<std::size_t>(t.subject)];
    auto& bwd = targets.backward[static_cast<std::size_t>(t.object)];
    if (fwd.pos == 0) {
      fwd = {t.object + 1, t.relation};
      ++covered;
    } else if (bwd.pos == 0) {
      bwd = {t.subject + 1, t.relation};
      ++covered;
    }
  }
  targets.coverage = double(covered) / double(order.size());
  return targets;
}

DatasetSplit split_dataset(const std::vector<Example>& examples,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (examples.empty()) throw ValidationError("split_dataset: empty input");
  double total = 0;
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split_dataset: negative ratio");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("split_dataset: ratios sum to " + std::to_string(total));
  const Index n = static_cast<Index>(examples.size());
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937 rng(derive_seed(seed, 1));
  shuffle_inplace(idx, rng);

  const Index n_dev = static_cast<Index>(ratios[1] * double(n));
  const Index n_test = static_cast<Index>(ratios[2] * double(n));
  const Index n_train = n - n_dev - n_test;  // remainder goes to train
  DatasetSplit split;
  for (Index i = 0; i < n; ++i) {
    const Example& ex = examples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    if (i < n_train)
      split.train.push_back(ex);
    else if (i < n_train + n_dev)
      split.dev.push_back(ex);
    else
      split.test.push_back(ex);
  }
  return split;
}

OverlapType classify_overlap(const Example& ex) {
  const auto& ts = ex.triples;
  bool shared_entity = false;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      const auto pair_i = std::minmax(ts[i].subject, ts[i].object);
      const auto pair_j = std::minmax(ts[j].subject, ts[j].object);
      if (pair_i == pair_j) return OverlapType::kEpo;
      if (ts[i].subject == ts[j].subject || ts[i].subject == ts[j].object ||
          ts[i].object == ts[j].subject || ts[i].object == ts[j].object)
        shared_entity = true;
    }
  }
  return shared_entity ? OverlapType::kSeo : OverlapType::kNormal;
}

namespace {

struct SynthLexicon {
  std::vector<std::string> names;
  std::vector<std::string> fillers;
  std::vector<std::string> cues;  // cues[k] marks relations[k]
};

SynthLexicon build_lexicon(const SynthSpec& spec) {
  const Index reserved = 2 + static_cast<Index>(spec.relations.size());  // "and", "."
  const Index rest = spec.vocab_size - reserved;
  if (rest < 8)
    throw ConfigError("generate_synthetic: vocab_size " + std::to_string(spec.vocab_size) +
                      " too small for " + std::to_string(spec.relations.size()) +
                      " relations");
  Index n_names = std::max<Index>(6, rest * 2 / 3);
  if (rest - n_names < 2) n_names = rest - 2;
  SynthLexicon lex;
  for (Index i = 0; i < n_names; ++i) lex.names.push_back("name" + std::to_string(i));
  for (Index i = 0; i < rest - n_names; ++i)
    lex.fillers.push_back("filler" + std::to_string(i));
  for (const auto& r : spec.relations) lex.cues.push_back("cue_" + r);
  return lex;
}

// Appends an entity surface (1-2 name tokens) and records its span.
EntityMention append_entity(std::vector<std::string>& tokens, const SynthLexicon& lex,
                            Index name_idx, bool two_tokens, Index second_idx) {
  EntityMention e;
  e.start = static_cast<Index>(tokens.size());
  tokens.push_back(lex.names[static_cast<std::size_t>(name_idx)]);
  if (two_tokens) tokens.push_back(lex.names[static_cast<std::size_t>(second_idx)]);
  e.end = static_cast<Index>(tokens.size());
  e.type = "T" + std::to_string(name_idx % 3);
  return e;
}

}  // namespace

std::vector<Example> generate_synthetic(const SynthSpec& spec) {
  if (spec.vocab_size < 20)
    throw ConfigError("generate_synthetic: vocab_size must be >= 20");
  if (spec.max_entities < 2)
    throw ConfigError("generate_synthetic: max_entities must be >= 2");
  if (spec.relations.empty())
    throw ConfigError("generate_synthetic: no relation labels");
  static const std::vector<std::string> known = {"normal", "seo_1_to_n", "seo_n_to_1",
                                                 "chain"};
  double mix_total = 0;
  for (const auto& [pattern, frac] : spec.pattern_mix) {
    if (std::find(known.begin(), known.end(), pattern) == known.end())
      throw ConfigError("generate_synthetic: unknown pattern '" + pattern + "'");
    if (frac < 0) throw ConfigError("generate_synthetic: negative mix fraction");
    if (frac > 0 && pattern != "normal" && spec.max_entities < 3)
      throw ConfigError("generate_synthetic: pattern '" + pattern +
                        "' needs max_entities >= 3");
    mix_total += frac;
  }
  if (std::abs(mix_total - 1.0) > 1e-9)
    throw ConfigError("generate_synthetic: pattern mix sums to " + std::to_string(mix_total));

  const SynthLexicon lex = build_lexicon(spec);
  std::mt19937 rng(derive_seed(spec.seed, 7));

  // Exact floor allocation per pattern, remainder in canonical order.
  std::vector<std::string> plan;
  for (const auto& name : known) {
    auto it = spec.pattern_mix.find(name);
    const double frac = it == spec.pattern_mix.end() ? 0.0 : it->second;
    const Index count = static_cast<Index>(frac * double(spec.n_sentences));
    for (Index i = 0; i < count; ++i) plan.push_back(name);
  }
  for (std::size_t k = 0; static_cast<Index>(plan.size()) < spec.n_sentences; ++k) {
    const auto& name = known[k % known.size()];
    auto it = spec.pattern_mix.find(name);
    if (it != spec.pattern_mix.end() && it->second > 0) plan.push_back(name);
  }
  shuffle_inplace(plan, rng);

  const Index n_names = static_cast<Index>(lex.names.size());
  auto draw_names = [&](Index count) {
    std::set<Index> chosen;
    while (static_cast<Index>(chosen.size()) < count)
      chosen.insert(static_cast<Index>(uniform_below(rng, static_cast<std::uint32_t>(n_names))));
    std::vector<Index> v(chosen.begin(), chosen.end());
    shuffle_inplace(v, rng);
    return v;
  };
  auto draw_relation = [&] {
    return static_cast<std::size_t>(
        uniform_below(rng, static_cast<std::uint32_t>(spec.relations.size())));
  };
  auto maybe_filler = [&](std::vector<std::string>& tokens, double p) {
    while (uniform01(rng) < p) {
      tokens.push_back(lex.fillers[uniform_below(
          rng, static_cast<std::uint32_t>(lex.fillers.size()))]);
      p *= 0.3;
    }
  };
  auto entity = [&](std::vector<std::string>& tokens, Index name_idx) {
    const bool two = uniform01(rng) < 0.25;
    const Index second = static_cast<Index>(uniform_below(
        rng, static_cast<std::uint32_t>(n_names)));
    return append_entity(tokens, lex, name_idx, two, second);
  };

  std::vector<Example> out;
  for (const auto& pattern : plan) {
    Example ex;
    ex.pattern = pattern;
    maybe_filler(ex.tokens, 0.5);
    if (pattern == "normal") {
      auto names = draw_names(2);
      const auto r = draw_relation();
      ex.entities.push_back(entity(ex.tokens, names[0]));
      ex.tokens.push_back(lex.cues[r]);
      ex.entities.push_back(entity(ex.tokens, names[1]));
      ex.triples.push_back({0, spec.relations[r], 1});
    } else if (pattern == "seo_1_to_n") {
      const Index branches =
          2 + static_cast<Index>(uniform_below(
                  rng, static_cast<std::uint32_t>(spec.max_entities - 2)));
      auto names = draw_names(branches + 1);
      ex.entities.push_back(entity(ex.tokens, names[0]));
      for (Index b = 0; b < branches; ++b) {
        if (b > 0) ex.tokens.push_back("and");
        const auto r = draw_relation();
        ex.tokens.push_back(lex.cues[r]);
        ex.entities.push_back(entity(ex.tokens, names[static_cast<std::size_t>(b + 1)]));
        ex.triples.push_back({0, spec.relations[r], b + 1});
      }
    } else if (pattern == "seo_n_to_1") {
      const Index branches =
          2 + static_cast<Index>(uniform_below(
                  rng, static_cast<std::uint32_t>(spec.max_entities - 2)));
      auto names = draw_names(branches + 1);
      for (Index b = 0; b < branches; ++b) {
        if (b > 0) ex.tokens.push_back("and");
        ex.entities.push_back(entity(ex.tokens, names[static_cast<std::size_t>(b)]));
        const auto r = draw_relation();
        ex.tokens.push_back(lex.cues[r]);
        ex.triples.push_back({b, spec.relations[r], branches});
      }
      ex.entities.push_back(entity(ex.tokens, names[static_cast<std::size_t>(branches)]));
    } else {  // chain
      const Index hops = 2;
      auto names = draw_names(hops + 1);
      ex.entities.push_back(entity(ex.tokens, names[0]));
      for (Index h = 0; h < hops; ++h) {
        const auto r = draw_relation();
        ex.tokens.push_back(lex.cues[r]);
        ex.entities.push_back(entity(ex.tokens, names[static_cast<std::size_t>(h + 1)]));
        ex.triples.push_back({h, spec.relations[r], h + 1});
      }
    }
    ex.tokens.push_back(".");
    normalize_example(ex, "generate_synthetic: ");
    out.push_back(std::move(ex));
  }
  return out;
}

Vocab build_vocabs(const std::vector<Example>& train, Index min_count) {
  if (train.empty()) throw ValidationError("build_vocabs: empty training set");
  std::map<std::string, Index> word_count;
  std::set<std::string> chars;
  std::set<std::string> types;
  std::set<std::string> relations;
  chars.insert(" ");  // entity surfaces join tokens with a space
  for (const auto& ex : train) {
    for (const auto& tok : ex.tokens) {
      ++word_count[tok];
      for (const auto& cp : utf8_codepoints(tok)) chars.insert(cp);
    }
    for (const auto& e : ex.entities) types.insert(e.type);
    for (const auto& t : ex.triples) relations.insert(t.relation);
  }
  Vocab v;
  v.word_to_id[Vocab::kPadToken] = Vocab::kPad;
  v.word_to_id[Vocab::kUnkToken] = Vocab::kUnk;
  Index next = 2;
  for (const auto& [w, c] : word_count)
    if (c >= min_count && !v.word_to_id.count(w)) v.word_to_id[w] = next++;
  v.char_to_id[Vocab::kPadToken] = Vocab::kPad;
  v.char_to_id[Vocab::kUnkToken] = Vocab::kUnk;
  next = 2;
  for (const auto& c : chars)
    if (!v.char_to_id.count(c)) v.char_to_id[c] = next++;
  next = 0;
  for (const auto& t : types) v.type_to_id[t] = next++;
  v.relation_to_id[Vocab::kNoneLabel] = Vocab::kNoneRelation;
  v.relation_labels.push_back(Vocab::kNoneLabel);
  next = 1;
  for (const auto& r : relations) {
    if (r == Vocab::kNoneLabel) continue;
    v.relation_to_id[r] = next++;
    v.relation_labels.push_back(r);
  }
  return v;
}

CorpusStats corpus_stats(const std::vector<Example>& examples) {
  CorpusStats stats;
  stats.sentences = static_cast<Index>(examples.size());
  double coverage_sum = 0;
  for (const auto& ex : examples) {
    stats.triples += static_cast<Index>(ex.triples.size());
    switch (classify_overlap(ex)) {
      case OverlapType::kNormal: ++stats.normal; break;
      case OverlapType::kSeo: ++stats.seo; break;
      case OverlapType::kEpo: ++stats.epo; break;
    }
    coverage_sum += compute_pointer_targets(ex).coverage;
    if (!ex.pattern.empty()) ++stats.pattern_counts[ex.pattern];
  }
  stats.coverage_mean = examples.empty() ? 1.0 : coverage_sum / double(examples.size());
  return stats;
}

namespace {

json vocab_to_json(const Vocab& v) {
  json j;
  j["format_version"] = 1;
  j["word"] = v.word_to_id;
  j["char"] = v.char_to_id;
  j["entity_type"] = v.type_to_id;
  j["relation"] = v.relation_to_id;
  return j;
}

}  // namespace

void save_vocab(const std::string& path, const Vocab& vocab) {
  atomic_write_file(path, vocab_to_json(vocab).dump(2) + "\n");
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw ParseError(path + ": unsupported vocab format version");
    Vocab v;
    v.word_to_id = j.at("word").get<std::map<std::string, Index>>();
    v.char_to_id = j.at("char").get<std::map<std::string, Index>>();
    v.type_to_id = j.at("entity_type").get<std::map<std::string, Index>>();
    v.relation_to_id = j.at("relation").get<std::map<std::string, Index>>();
    v.relation_labels.assign(v.relation_to_id.size(), "");
    for (const auto& [label, id] : v.relation_to_id) {
      if (id < 0 || id >= static_cast<Index>(v.relation_labels.size()))
        throw ParseError(path + ": relation ids not dense");
      v.relation_labels[static_cast<std::size_t>(id)] = label;
    }
    return v;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string vocab_hash(const Vocab& vocab) {
  const std::string dump = vocab_to_json(vocab).dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace dpn
