#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "dpn/dataset.hpp"
#include "dpn/random.hpp"

using namespace dpn;

namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dpn_dataset_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

// The running example: "Lee was employed at ABC Mart where his Father was
// the owner" with three SEO triples.
Example employment_example() {
  Example ex;
  ex.tokens = {"Lee", "was", "employed", "at", "ABC", "Mart",
               "where", "his", "Father", "was", "the", "owner"};
  ex.entities = {{0, 1, "PER"}, {4, 6, "ORG"}, {7, 9, "PER"}};
  ex.triples = {{0, "Employed", 1}, {0, "Family", 2}, {2, "Owner", 1}};
  return ex;
}

std::string example_jsonl(const Example& ex) {
  std::string s = R"({"tokens":[)";
  for (std::size_t i = 0; i < ex.tokens.size(); ++i)
    s += (i ? ",\"" : "\"") + ex.tokens[i] + "\"";
  s += R"(],"entities":[)";
  for (std::size_t i = 0; i < ex.entities.size(); ++i) {
    const auto& e = ex.entities[i];
    s += (i ? "," : "") + std::string("{\"start\":") + std::to_string(e.start) +
         ",\"end\":" + std::to_string(e.end) + ",\"type\":\"" + e.type + "\"}";
  }
  s += R"(],"triples":[)";
  for (std::size_t i = 0; i < ex.triples.size(); ++i) {
    const auto& t = ex.triples[i];
    s += (i ? "," : "") + std::string("{\"subject\":") + std::to_string(t.subject) +
         ",\"relation\":\"" + t.relation + "\",\"object\":" + std::to_string(t.object) + "}";
  }
  s += "]}";
  return s;
}

// Independent reconstruction oracle: the triples a PointerTargets encodes.
std::set<Triple> reconstruct(const PointerTargets& t) {
  std::set<Triple> out;
  for (Index i = 0; i < static_cast<Index>(t.forward.size()); ++i) {
    const auto& f = t.forward[static_cast<std::size_t>(i)];
    if (f.pos != 0) out.insert({i, f.relation, f.pos - 1});
    const auto& b = t.backward[static_cast<std::size_t>(i)];
    if (b.pos != 0) out.insert({b.pos - 1, b.relation, i});
  }
  return out;
}

}  // namespace

TEST_CASE("load_corpus reads the employment sentence") {
  const auto path = temp_path("fig1.jsonl");
  atomic_write_file(path, example_jsonl(employment_example()) + "\n");
  auto examples = load_corpus(path);
  REQUIRE(examples.size() == 1);
  CHECK(examples[0].entities.size() == 3);
  CHECK(examples[0].triples.size() == 3);
  CHECK(examples[0].entities[1].type == "ORG");
}

TEST_CASE("load_corpus edge cases") {
  const auto empty = temp_path("empty.jsonl");
  atomic_write_file(empty, "");
  CHECK(load_corpus(empty).empty());

  const auto bad = temp_path("bad_index.jsonl");
  atomic_write_file(bad,
                    R"({"tokens":["a","b"],"entities":[{"start":0,"end":1,"type":"T"},)"
                    R"({"start":1,"end":2,"type":"T"}],"triples":[{"subject":0,"relation":"r","object":5}]})"
                    "\n");
  CHECK_THROWS_AS(load_corpus(bad), ValidationError);

  const auto malformed = temp_path("malformed.jsonl");
  atomic_write_file(malformed, "{\"tokens\": [\n");
  CHECK_THROWS_WITH_AS(load_corpus(malformed), doctest::Contains(":1:"), ParseError);

  const auto span = temp_path("bad_span.jsonl");
  atomic_write_file(span,
                    R"({"tokens":["a"],"entities":[{"start":0,"end":2,"type":"T"}],"triples":[]})"
                    "\n");
  CHECK_THROWS_AS(load_corpus(span), ValidationError);

  // triples may be omitted entirely (prediction inputs)
  const auto no_triples = temp_path("no_triples.jsonl");
  atomic_write_file(no_triples,
                    R"({"tokens":["a"],"entities":[{"start":0,"end":1,"type":"T"}]})"
                    "\n");
  CHECK(load_corpus(no_triples).size() == 1);
}

TEST_CASE("load_corpus sorts entities and remaps triples") {
  const auto path = temp_path("unsorted.jsonl");
  // entity 0 appears after entity 1 in the sentence
  atomic_write_file(path,
                    R"({"tokens":["a","b","c"],"entities":[{"start":2,"end":3,"type":"X"},)"
                    R"({"start":0,"end":1,"type":"Y"}],"triples":[{"subject":0,"relation":"r","object":1}]})"
                    "\n");
  auto examples = load_corpus(path);
  REQUIRE(examples.size() == 1);
  CHECK(examples[0].entities[0].type == "Y");
  CHECK(examples[0].entities[1].type == "X");
  // original triple said (late entity -> early entity)
  CHECK(examples[0].triples[0].subject == 1);
  CHECK(examples[0].triples[0].object == 0);
}

TEST_CASE("corpus save/load round trip") {
  auto ex = employment_example();
  ex.pattern = "normal";
  const auto path = temp_path("round.jsonl");
  save_corpus(path, {ex});
  auto back = load_corpus(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].tokens == ex.tokens);
  CHECK(back[0].entities == ex.entities);
  CHECK(back[0].triples == ex.triples);
  CHECK(back[0].pattern == "normal");
}

TEST_CASE("merge_shared_sentences unions triples") {
  auto full = employment_example();
  std::vector<Example> records;
  for (const auto& t : full.triples) {
    Example rec;
    rec.tokens = full.tokens;
    rec.entities = full.entities;
    rec.triples = {t};
    records.push_back(rec);
  }
  auto merged = merge_shared_sentences(records);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].triples.size() == 3);

  // identity on a single record
  auto single = merge_shared_sentences({records[0]});
  REQUIRE(single.size() == 1);
  CHECK(single[0].triples == records[0].triples);

  // duplicate triples collapse
  auto doubled = merge_shared_sentences({records[0], records[0]});
  CHECK(doubled[0].triples.size() == 1);

  // conflicting type for the same span
  auto conflicted = records[1];
  conflicted.entities[1].type = "LOC";
  CHECK_THROWS_AS(merge_shared_sentences({records[0], conflicted}), ValidationError);
}

TEST_CASE("compute_pointer_targets greedy trace on the employment sentence") {
  auto t = compute_pointer_targets(employment_example());
  REQUIRE(t.forward.size() == 3);
  // Lee -> ABC Mart (Employed), his Father -> ABC Mart (Owner)
  CHECK(t.forward[0].pos == 2);
  CHECK(t.forward[0].relation == "Employed");
  CHECK(t.forward[2].pos == 2);
  CHECK(t.forward[2].relation == "Owner");
  CHECK(t.forward[1].pos == 0);
  // his Father -> Lee (Family) in the backward direction
  CHECK(t.backward[2].pos == 1);
  CHECK(t.backward[2].relation == "Family");
  CHECK(t.backward[0].pos == 0);
  CHECK(t.backward[1].pos == 0);
  CHECK(t.coverage == 1.0);
}

TEST_CASE("compute_pointer_targets star and empty cases") {
  Example empty;
  empty.tokens = {"x"};
  empty.entities = {{0, 1, "T"}};
  auto t0 = compute_pointer_targets(empty);
  CHECK(t0.coverage == 1.0);
  CHECK(t0.forward[0].pos == 0);
  CHECK(t0.forward[0].relation == Vocab::kNoneLabel);

  // 1-to-3 star: forward covers the first object, backward the rest
  Example star;
  star.tokens = {"a", "b", "c", "d"};
  star.entities = {{0, 1, "T"}, {1, 2, "T"}, {2, 3, "T"}, {3, 4, "T"}};
  star.triples = {{0, "r1", 1}, {0, "r2", 2}, {0, "r3", 3}};
  auto t = compute_pointer_targets(star);
  CHECK(t.coverage == 1.0);
  CHECK(t.forward[0].pos == 2);
  CHECK(t.backward[2].pos == 1);
  CHECK(t.backward[3].pos == 1);
  CHECK(t.backward[1].pos == 0);  // first branch went forward instead
}

TEST_CASE("pointer targets never self-point and reconstruct to a gold subset") {
  SynthSpec spec;
  spec.n_sentences = 120;
  spec.relations = {"r1", "r2", "r3"};
  spec.pattern_mix = {{"normal", 0.4}, {"seo_1_to_n", 0.3}, {"seo_n_to_1", 0.2}, {"chain", 0.1}};
  spec.max_entities = 4;
  spec.seed = 5;
  auto corpus = generate_synthetic(spec);
  for (const auto& ex : corpus) {
    auto t = compute_pointer_targets(ex);
    const std::set<Triple> gold(ex.triples.begin(), ex.triples.end());
    for (Index i = 0; i < static_cast<Index>(t.forward.size()); ++i) {
      CHECK(t.forward[static_cast<std::size_t>(i)].pos != i + 1);
      CHECK(t.backward[static_cast<std::size_t>(i)].pos != i + 1);
    }
    auto rebuilt = reconstruct(t);
    for (const auto& tr : rebuilt) CHECK(gold.count(tr) == 1);
    CHECK(double(rebuilt.size()) ==
          doctest::Approx(t.coverage * double(gold.size())).epsilon(1e-12));
    CHECK(t.coverage == 1.0);  // all generator patterns are representable
  }
}

TEST_CASE("split_dataset floor rule and determinism") {
  std::vector<Example> corpus;
  Example dummy;
  dummy.tokens = {"x"};
  for (int i = 0; i < 6279; ++i) corpus.push_back(dummy);
  auto split = split_dataset(corpus, {0.8, 0.1, 0.1}, 3);
  CHECK(split.train.size() == 5025);
  CHECK(split.dev.size() == 627);
  CHECK(split.test.size() == 627);

  corpus.resize(10);
  auto small = split_dataset(corpus, {0.8, 0.1, 0.1}, 3);
  CHECK(small.train.size() == 8);
  CHECK(small.dev.size() == 1);
  CHECK(small.test.size() == 1);

  CHECK_THROWS_AS(split_dataset({}, {0.8, 0.1, 0.1}, 3), ValidationError);
  CHECK_THROWS_AS(split_dataset(corpus, {0.8, 0.1, 0.2}, 3), ConfigError);
}

TEST_CASE("split_dataset is a disjoint exhaustive partition for any seed") {
  SynthSpec spec;
  spec.n_sentences = 53;
  spec.relations = {"r1", "r2"};
  spec.pattern_mix = {{"normal", 1.0}};
  spec.seed = 11;
  auto corpus = generate_synthetic(spec);
  for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
    auto split = split_dataset(corpus, {0.8, 0.1, 0.1}, seed);
    CHECK(split.train.size() + split.dev.size() + split.test.size() == corpus.size());
    std::multiset<std::string> all, original;
    auto key = [](const Example& e) {
      std::string k;
      for (const auto& t : e.tokens) k += t + "|";
      return k;
    };
    for (const auto& e : corpus) original.insert(key(e));
    for (const auto& part : {split.train, split.dev, split.test})
      for (const auto& e : part) all.insert(key(e));
    CHECK(all == original);

    auto again = split_dataset(corpus, {0.8, 0.1, 0.1}, seed);
    CHECK(again.train.size() == split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i)
      CHECK(again.train[i].tokens == split.train[i].tokens);
  }
}

TEST_CASE("generate_synthetic patterns, determinism, and histogram") {
  SynthSpec star;
  star.n_sentences = 40;
  star.relations = {"r1", "r2"};
  star.pattern_mix = {{"seo_1_to_n", 1.0}};
  star.max_entities = 3;
  star.seed = 9;
  auto corpus = generate_synthetic(star);
  REQUIRE(corpus.size() == 40);
  for (const auto& ex : corpus) {
    CHECK(ex.entities.size() == 3);
    REQUIRE(ex.triples.size() == 2);
    CHECK(ex.triples[0].subject == ex.triples[1].subject);
    CHECK(ex.triples[0].object != ex.triples[1].object);
  }

  const auto p1 = temp_path("synth_a.jsonl"), p2 = temp_path("synth_b.jsonl");
  save_corpus(p1, corpus);
  save_corpus(p2, generate_synthetic(star));
  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);

  SynthSpec mixed;
  mixed.n_sentences = 300;
  mixed.relations = {"r1", "r2", "r3", "r4", "r5"};
  mixed.pattern_mix = {{"normal", 0.5}, {"seo_1_to_n", 0.25}, {"seo_n_to_1", 0.25}};
  mixed.max_entities = 3;
  mixed.seed = 7;
  auto stats = corpus_stats(generate_synthetic(mixed));
  CHECK(stats.sentences == 300);
  CHECK(stats.pattern_counts["normal"] == 150);
  CHECK(stats.pattern_counts["seo_1_to_n"] == 75);
  CHECK(stats.pattern_counts["seo_n_to_1"] == 75);
  CHECK(stats.normal == 150);
  CHECK(stats.seo == 150);
  CHECK(stats.epo == 0);
  CHECK(stats.coverage_mean == 1.0);

  SynthSpec bad = star;
  bad.max_entities = 2;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  SynthSpec tiny = star;
  tiny.vocab_size = 10;
  CHECK_THROWS_AS(generate_synthetic(tiny), ConfigError);

  SynthSpec none = star;
  none.n_sentences = 0;
  CHECK(generate_synthetic(none).empty());
}

TEST_CASE("classify_overlap taxonomy") {
  CHECK(classify_overlap(employment_example()) == OverlapType::kSeo);

  Example single;
  single.tokens = {"a", "b"};
  single.entities = {{0, 1, "T"}, {1, 2, "T"}};
  single.triples = {{0, "r", 1}};
  CHECK(classify_overlap(single) == OverlapType::kNormal);

  Example epo = single;
  epo.triples = {{0, "r1", 1}, {0, "r2", 1}};
  CHECK(classify_overlap(epo) == OverlapType::kEpo);

  Example epo_reversed = single;
  epo_reversed.triples = {{0, "r1", 1}, {1, "r2", 0}};
  CHECK(classify_overlap(epo_reversed) == OverlapType::kEpo);  // unordered pair

  // permutation invariance over triple order
  auto shuffled = employment_example();
  std::swap(shuffled.triples[0], shuffled.triples[2]);
  CHECK(classify_overlap(shuffled) == classify_overlap(employment_example()));
}

TEST_CASE("build_vocabs reserved ids and round trip") {
  Example a;
  a.tokens = {"a", "b"};
  a.entities = {{0, 1, "PER"}, {1, 2, "ORG"}};
  a.triples = {{0, "r2", 1}, {1, "r1", 0}};
  Example b;
  b.tokens = {"a"};
  b.entities = {{0, 1, "PER"}};
  auto vocab = build_vocabs({a, b}, 1);

  CHECK(vocab.word_to_id.at(Vocab::kPadToken) == 0);
  CHECK(vocab.word_to_id.at(Vocab::kUnkToken) == 1);
  CHECK(vocab.word_to_id.count("a") == 1);
  CHECK(vocab.word_to_id.count("b") == 1);
  CHECK(vocab.word_id("zzz") == Vocab::kUnk);

  CHECK(vocab.relation_to_id.at(Vocab::kNoneLabel) == 0);
  CHECK(vocab.relation_to_id.at("r1") == 1);
  CHECK(vocab.relation_to_id.at("r2") == 2);
  CHECK(vocab.relation_label(2) == "r2");
  CHECK_THROWS_AS(vocab.relation_id("r9"), ValidationError);
  CHECK_THROWS_AS(vocab.type_id("LOC"), ValidationError);

  CHECK_THROWS_AS(build_vocabs({}, 1), ValidationError);

  const auto path = temp_path("vocab.json");
  save_vocab(path, vocab);
  auto back = load_vocab(path);
  CHECK(back.word_to_id == vocab.word_to_id);
  CHECK(back.char_to_id == vocab.char_to_id);
  CHECK(back.type_to_id == vocab.type_to_id);
  CHECK(back.relation_to_id == vocab.relation_to_id);
  CHECK(vocab_hash(back) == vocab_hash(vocab));
}

TEST_CASE("utf8_codepoints splits multibyte sequences") {
  auto cps = utf8_codepoints("a\xC3\xA9" "b");  // a, e-acute, b
  REQUIRE(cps.size() == 3);
  CHECK(cps[0] == "a");
  CHECK(cps[1] == "\xC3\xA9");
  CHECK(cps[2] == "b");
}
