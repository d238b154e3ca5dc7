#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpn/decoder.hpp"
#include "dpn/loss.hpp"

namespace dpn {

struct PrfCounts {
  Index gold = 0;
  Index predicted = 0;
  Index correct = 0;
  double precision() const { return predicted == 0 ? 0.0 : double(correct) / double(predicted); }
  double recall() const { return gold == 0 ? 0.0 : double(correct) / double(gold); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// Micro precision/recall/F1 over exact (subject, relation, object) matches,
// with per-relation and per-overlap-type breakdowns.
struct EvalReport {
  PrfCounts counts;
  double precision = 0, recall = 0, f1 = 0;
  std::map<std::string, PrfCounts> per_relation;
  std::map<std::string, PrfCounts> per_overlap;  // keys: normal, seo, epo
  double mean_forward_ceiling = 1.0;
};

// One mismatched sentence with each triple-level mistake classified.
struct TripleJudgement {
  Triple triple;
  std::string kind;  // wrong-position | wrong-relation | missed | spurious
};

struct ErrorRecord {
  Index sentence_index = 0;
  std::vector<std::string> tokens;
  std::vector<Triple> gold;
  std::vector<Triple> predicted;
  std::vector<TripleJudgement> mistakes;
};

// Aligned gold/predicted triple sets, one per sentence. Duplicates within a
// sentence are collapsed before counting.
EvalReport micro_prf(const std::vector<std::vector<Triple>>& gold,
                     const std::vector<std::vector<Triple>>& pred);

std::vector<Triple> strip_predictions(const TripleSet& predictions);

// Classifies every mismatch of one sentence; the four kinds partition all
// mistakes so counts reconcile with gold/predicted/correct totals.
std::vector<TripleJudgement> judge_sentence(const std::vector<Triple>& gold,
                                            const std::vector<Triple>& pred);

struct AblationRow {
  std::string label;
  EvalReport report;
};

std::string format_ablation_table(const std::vector<AblationRow>& rows,
                                  std::uint64_t seed);
std::string ablation_report_json(const std::vector<AblationRow>& rows,
                                 std::uint64_t seed);
std::string eval_report_json(const EvalReport& report);

// Greedy inference for one sentence; forward-only when dual_eval is false
// (the backward decoder is simply not consulted).
template <class Scalar>
TripleSet predict_sentence(const Model<Scalar>& m, const Example& ex, const Vocab& vocab,
                           bool dual_eval = true) {
  if (ex.entities.empty()) return {};
  std::mt19937 rng(0);  // inference consumes no randomness
  auto enc = encode(m, ex, vocab, /*training=*/false, rng);
  auto fwd = decode(m, enc, Direction::kObjects, /*training=*/false, rng);
  DecoderOutput<Scalar> bwd;
  bwd.direction = Direction::kSubjects;
  if (dual_eval && m.dual) bwd = decode(m, enc, Direction::kSubjects, false, rng);
  return assemble_triples(fwd, bwd, vocab);
}

template <class Scalar>
EvalReport evaluate_model(const Model<Scalar>& m, const std::vector<Example>& data,
                          const Vocab& vocab, bool dual_eval = true) {
  std::vector<std::vector<Triple>> gold, pred;
  gold.reserve(data.size());
  pred.reserve(data.size());
  for (const auto& ex : data) {
    gold.push_back(ex.triples);
    pred.push_back(strip_predictions(predict_sentence(m, ex, vocab, dual_eval)));
  }
  EvalReport report = micro_prf(gold, pred);

  double ceiling_sum = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ceiling_sum += forward_only_ceiling(data[i]);
    const char* key = "normal";
    switch (classify_overlap(data[i])) {
      case OverlapType::kNormal: key = "normal"; break;
      case OverlapType::kSeo: key = "seo"; break;
      case OverlapType::kEpo: key = "epo"; break;
    }
    auto& bucket = report.per_overlap[key];
    const std::set<Triple> g(gold[i].begin(), gold[i].end());
    const std::set<Triple> p(pred[i].begin(), pred[i].end());
    bucket.gold += static_cast<Index>(g.size());
    bucket.predicted += static_cast<Index>(p.size());
    for (const auto& t : p) bucket.correct += g.count(t) ? 1 : 0;
  }
  report.mean_forward_ceiling = data.empty() ? 1.0 : ceiling_sum / double(data.size());
  return report;
}

template <class Scalar>
std::vector<ErrorRecord> error_report(const Model<Scalar>& m,
                                      const std::vector<Example>& data, const Vocab& vocab,
                                      std::size_t limit, bool dual_eval = true) {
  std::vector<ErrorRecord> out;
  for (std::size_t i = 0; i < data.size() && out.size() < limit; ++i) {
    const auto pred = strip_predictions(predict_sentence(m, data[i], vocab, dual_eval));
    auto mistakes = judge_sentence(data[i].triples, pred);
    if (mistakes.empty()) continue;
    ErrorRecord rec;
    rec.sentence_index = static_cast<Index>(i);
    rec.tokens = data[i].tokens;
    rec.gold = data[i].triples;
    rec.predicted = pred;
    rec.mistakes = std::move(mistakes);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace dpn
