#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "dpn/evaluation.hpp"
#include "dpn/random.hpp"
#include "json.hpp"

using namespace dpn;

namespace {

double f1_of(double precision, double recall) {
  return precision + recall == 0 ? 0.0
                                 : 2.0 * precision * recall / (precision + recall);
}

// Brute-force oracle: per-sentence set intersection, nothing shared with the
// library implementation.
struct BruteCounts {
  long gold = 0, predicted = 0, correct = 0;
};

BruteCounts brute_force(const std::vector<std::vector<Triple>>& gold,
                        const std::vector<std::vector<Triple>>& pred) {
  BruteCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<Triple> g(gold[i].begin(), gold[i].end());
    std::set<Triple> p(pred[i].begin(), pred[i].end());
    c.gold += static_cast<long>(g.size());
    c.predicted += static_cast<long>(p.size());
    for (const auto& t : p)
      if (g.count(t)) ++c.correct;
  }
  return c;
}

std::vector<Triple> random_triples(std::mt19937& rng, Index entities, Index n,
                                   const std::vector<std::string>& labels) {
  std::set<Triple> out;
  for (Index k = 0; k < n; ++k) {
    const Index s = uniform_below(rng, static_cast<std::uint32_t>(entities));
    Index o = uniform_below(rng, static_cast<std::uint32_t>(entities));
    if (o == s) o = (o + 1) % entities;
    out.insert({s, labels[uniform_below(rng, static_cast<std::uint32_t>(labels.size()))], o});
  }
  return {out.begin(), out.end()};
}

}  // namespace

TEST_CASE("f1 from the published precision/recall pairs") {
  CHECK(f1_of(0.787, 0.832) >= 0.808);
  CHECK(f1_of(0.787, 0.832) <= 0.809);
  CHECK(std::abs(f1_of(0.749, 0.820) - 0.783) <= 0.001);
}

TEST_CASE("micro_prf exact arithmetic") {
  // gold 4, predicted 3, correct 2
  std::vector<std::vector<Triple>> gold = {
      {{0, "a", 1}, {1, "a", 2}, {2, "a", 3}, {3, "a", 0}}};
  std::vector<std::vector<Triple>> pred = {{{0, "a", 1}, {1, "a", 2}, {0, "b", 2}}};
  auto r = micro_prf(gold, pred);
  CHECK(std::abs(r.precision - 2.0 / 3.0) <= 1e-4);
  CHECK(std::abs(r.recall - 0.5) <= 1e-4);
  CHECK(std::abs(r.f1 - 0.5714) <= 1e-4);

  auto perfect = micro_prf(gold, gold);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  auto empty = micro_prf({}, {});
  CHECK(empty.f1 == 0.0);

  CHECK_THROWS_AS(micro_prf(gold, {}), ValidationError);
}

TEST_CASE("micro_prf agrees with the brute-force oracle on random corpora") {
  std::mt19937 rng(31);
  const std::vector<std::string> labels = {"r1", "r2", "r3"};
  for (int corpus = 0; corpus < 20; ++corpus) {
    std::vector<std::vector<Triple>> gold, pred;
    const Index sentences = 1 + uniform_below(rng, 30);
    for (Index s = 0; s < sentences; ++s) {
      const Index entities = 2 + uniform_below(rng, 5);
      gold.push_back(random_triples(rng, entities, uniform_below(rng, 5), labels));
      pred.push_back(random_triples(rng, entities, uniform_below(rng, 5), labels));
    }
    auto r = micro_prf(gold, pred);
    auto b = brute_force(gold, pred);
    CHECK(r.counts.gold == b.gold);
    CHECK(r.counts.predicted == b.predicted);
    CHECK(r.counts.correct == b.correct);
    const double p = b.predicted ? double(b.correct) / double(b.predicted) : 0.0;
    const double rr = b.gold ? double(b.correct) / double(b.gold) : 0.0;
    CHECK(std::abs(r.precision - p) <= 1e-12);
    CHECK(std::abs(r.recall - rr) <= 1e-12);
    CHECK(std::abs(r.f1 - f1_of(p, rr)) <= 1e-12);

    // permutation invariance over sentences
    std::vector<std::vector<Triple>> gold2(gold.rbegin(), gold.rend());
    std::vector<std::vector<Triple>> pred2(pred.rbegin(), pred.rend());
    auto r2 = micro_prf(gold2, pred2);
    CHECK(r2.f1 == r.f1);

    // harmonic-mean bounds
    CHECK(r.f1 <= 2.0 * std::min(r.precision, r.recall) + 1e-12);
    CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-12);
    CHECK(r.counts.correct <= std::min(r.counts.gold, r.counts.predicted));
  }
}

TEST_CASE("judge_sentence partitions mismatches and reconciles counts") {
  std::vector<Triple> gold = {{0, "a", 1}, {1, "b", 2}, {2, "c", 3}};

  // perfect prediction: nothing to report
  CHECK(judge_sentence(gold, gold).empty());

  std::vector<Triple> pred = {
      {0, "a", 1},   // correct
      {1, "x", 2},   // wrong-relation (pair matches)
      {2, "c", 0},   // wrong-position (subject+relation match, object off)
      {3, "zz", 0},  // spurious
  };
  auto verdicts = judge_sentence(gold, pred);
  std::map<std::string, int> kinds;
  for (const auto& v : verdicts) ++kinds[v.kind];
  CHECK(kinds["wrong-relation"] == 1);
  CHECK(kinds["wrong-position"] == 1);
  CHECK(kinds["spurious"] == 1);
  CHECK(kinds["missed"] == 2);  // gold triples for (1,b,2) and (2,c,3)

  // counting identity: correct + missed = gold,
  // correct + wrong-* + spurious = predicted
  std::mt19937 rng(7);
  const std::vector<std::string> labels = {"a", "b"};
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_triples(rng, 4, uniform_below(rng, 4), labels);
    auto p = random_triples(rng, 4, uniform_below(rng, 4), labels);
    auto vs = judge_sentence(g, p);
    std::map<std::string, long> count;
    for (const auto& v : vs) ++count[v.kind];
    const std::set<Triple> gs(g.begin(), g.end()), ps(p.begin(), p.end());
    long correct = 0;
    for (const auto& t : ps) correct += gs.count(t) ? 1 : 0;
    CHECK(correct + count["missed"] == static_cast<long>(gs.size()));
    CHECK(correct + count["wrong-relation"] + count["wrong-position"] +
              count["spurious"] ==
          static_cast<long>(ps.size()));
  }
}

TEST_CASE("evaluate_model structural recall ceiling on a star corpus") {
  SynthSpec spec;
  spec.n_sentences = 12;
  spec.relations = {"r1", "r2"};
  spec.pattern_mix = {{"seo_1_to_n", 1.0}};
  spec.max_entities = 3;
  spec.seed = 17;
  auto corpus = generate_synthetic(spec);
  auto vocab = build_vocabs(corpus);

  Hyperparams h;
  h.word_dim = 10;
  h.char_dim = 6;
  h.entity_type_dim = 5;
  h.cnn_filter_sizes = {2, 3};
  h.cnn_total_filters = 6;
  h.encoder_hidden = 8;
  h.decoder_hidden = 16;
  h.heads = 2;
  h.head_dim = 4;
  h.dropout = 0.0;
  auto model = build_model<float>(h, vocab, AttentionKind::kMulti, true, 11);

  auto forward_only = evaluate_model(model, corpus, vocab, /*dual_eval=*/false);
  CHECK(forward_only.mean_forward_ceiling == doctest::Approx(0.5));
  CHECK(forward_only.recall <= 0.5 + 1e-9);

  auto report = evaluate_model(model, corpus, vocab, true);
  CHECK(report.counts.gold == 24);
  CHECK(report.per_overlap.count("seo") == 1);
  CHECK(report.per_overlap.at("seo").gold == 24);

  auto none = evaluate_model(model, std::vector<Example>{}, vocab, true);
  CHECK(none.counts.gold == 0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("report serialization") {
  std::vector<std::vector<Triple>> gold = {{{0, "a", 1}}};
  auto report = micro_prf(gold, gold);
  auto parsed = nlohmann::json::parse(eval_report_json(report));
  CHECK(parsed.at("f1").get<double>() == 1.0);
  CHECK(parsed.at("counts").at("gold").get<int>() == 1);

  std::vector<AblationRow> rows;
  for (const auto* label :
       {"single/forward", "single/dual", "multi/forward", "multi/dual"})
    rows.push_back({label, report});
  const auto table = format_ablation_table(rows, 99);
  CHECK(table.find("multi/dual") != std::string::npos);
  CHECK(table.find("ceiling") != std::string::npos);
  CHECK(table.find("99") != std::string::npos);
  auto jr = nlohmann::json::parse(ablation_report_json(rows, 99));
  CHECK(jr.at("rows").size() == 4);
}
