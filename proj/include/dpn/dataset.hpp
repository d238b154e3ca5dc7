#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpn/errors.hpp"
#include "dpn/tensor.hpp"

namespace dpn {

// Token span [start, end) with a closed-set type label.
struct EntityMention {
  Index start = 0;
  Index end = 0;
  std::string type;
  bool operator==(const EntityMention&) const = default;
};

// Relation between two entity mentions, by entity index.
struct Triple {
  Index subject = 0;
  std::string relation;
  Index object = 0;
  auto operator<=>(const Triple&) const = default;
};

// One sentence: tokens, gold entity mentions (sorted by (start, end)), and
// the gold triple set. `pattern` is a generator tag, empty for real corpora.
struct Example {
  std::vector<std::string> tokens;
  std::vector<EntityMention> entities;
  std::vector<Triple> triples;
  std::string pattern;
};

// Reserved ids: PAD=0 and UNK=1 for words/chars, NONE=0 for relations.
class Vocab {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kUnk = 1;
  static constexpr Index kNoneRelation = 0;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kNoneLabel = "NONE";

  Index word_id(const std::string& w) const {
    auto it = word_to_id.find(w);
    return it == word_to_id.end() ? kUnk : it->second;
  }
  Index char_id(const std::string& cp) const {
    auto it = char_to_id.find(cp);
    return it == char_to_id.end() ? kUnk : it->second;
  }
  // Entity types and relations are closed sets; unknown labels are errors.
  Index type_id(const std::string& t) const {
    auto it = type_to_id.find(t);
    if (it == type_to_id.end())
      throw ValidationError("unknown entity type '" + t + "'");
    return it->second;
  }
  Index relation_id(const std::string& r) const {
    auto it = relation_to_id.find(r);
    if (it == relation_to_id.end())
      throw ValidationError("unknown relation '" + r + "'");
    return it->second;
  }
  const std::string& relation_label(Index id) const {
    if (id < 0 || id >= static_cast<Index>(relation_labels.size()))
      throw ValidationError("relation id " + std::to_string(id) + " out of range");
    return relation_labels[static_cast<std::size_t>(id)];
  }

  Index word_count() const { return static_cast<Index>(word_to_id.size()); }
  Index char_count() const { return static_cast<Index>(char_to_id.size()); }
  Index type_count() const { return static_cast<Index>(type_to_id.size()); }
  Index relation_count() const { return static_cast<Index>(relation_to_id.size()); }

  std::map<std::string, Index> word_to_id;
  std::map<std::string, Index> char_to_id;
  std::map<std::string, Index> type_to_id;
  std::map<std::string, Index> relation_to_id;
  std::vector<std::string> relation_labels;  // id -> label
};

// Supervision for one decoding direction of one entity: the slot to point at
// (0 = NULL, j+1 = entity j) and the relation label (NONE when slot is NULL).
struct PointerSlot {
  Index pos = 0;
  std::string relation = Vocab::kNoneLabel;
};

struct PointerTargets {
  std::vector<PointerSlot> forward;   // entity t -> its object
  std::vector<PointerSlot> backward;  // entity t -> its subject
  double coverage = 1.0;              // gold triples representable / gold total
};

enum class OverlapType { kNormal, kSeo, kEpo };

struct CorpusStats {
  Index sentences = 0;
  Index triples = 0;
  Index normal = 0;
  Index seo = 0;
  Index epo = 0;
  double coverage_mean = 1.0;
  std::map<std::string, Index> pattern_counts;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

struct SynthSpec {
  Index n_sentences = 0;
  Index vocab_size = 60;
  std::vector<std::string> relations;
  // pattern -> fraction, over {normal, seo_1_to_n, seo_n_to_1, chain}
  std::map<std::string, double> pattern_mix = {{"normal", 1.0}};
  Index max_entities = 3;
  std::uint64_t seed = 0;
};

// Decoded UTF-8 code points, one string each; invalid bytes pass through
// singly so arbitrary input still embeds via UNK.
std::vector<std::string> utf8_codepoints(const std::string& s);

// JSONL corpus reader. With a vocab, entity types are validated eagerly
// (unknown words are fine everywhere; they map to UNK at embedding time).
std::vector<Example> load_corpus(const std::string& path, const Vocab* vocab = nullptr);

void save_corpus(const std::string& path, const std::vector<Example>& examples);

// Collapses per-triple records sharing one token sequence into one Example
// with unioned entities and triples.
std::vector<Example> merge_shared_sentences(const std::vector<Example>& records);

// Greedy slot assignment over gold triples in (subject, object) order:
// subject's free forward slot first, else object's free backward slot, else
// the triple goes uncovered.
PointerTargets compute_pointer_targets(const Example& ex);

DatasetSplit split_dataset(const std::vector<Example>& examples,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

std::vector<Example> generate_synthetic(const SynthSpec& spec);

OverlapType classify_overlap(const Example& ex);

Vocab build_vocabs(const std::vector<Example>& train, Index min_count = 1);

CorpusStats corpus_stats(const std::vector<Example>& examples);

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

// Canonical vocab fingerprint stored in checkpoints.
std::string vocab_hash(const Vocab& vocab);

// Atomic file write: temp file then rename.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace dpn
