#include "dpn/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace dpn {

using nlohmann::json;

EvalReport micro_prf(const std::vector<std::vector<Triple>>& gold,
                     const std::vector<std::vector<Triple>>& pred) {
  if (gold.size() != pred.size())
    throw ValidationError("micro_prf: " + std::to_string(gold.size()) + " gold vs " +
                          std::to_string(pred.size()) + " predicted sentences");
  EvalReport report;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<Triple> g(gold[i].begin(), gold[i].end());
    const std::set<Triple> p(pred[i].begin(), pred[i].end());
    report.counts.gold += static_cast<Index>(g.size());
    report.counts.predicted += static_cast<Index>(p.size());
    for (const auto& t : g) ++report.per_relation[t.relation].gold;
    for (const auto& t : p) {
      ++report.per_relation[t.relation].predicted;
      if (g.count(t)) {
        ++report.counts.correct;
        ++report.per_relation[t.relation].correct;
      }
    }
  }
  report.precision = report.counts.precision();
  report.recall = report.counts.recall();
  report.f1 = report.counts.f1();
  return report;
}

std::vector<Triple> strip_predictions(const TripleSet& predictions) {
  std::vector<Triple> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back({p.subject, p.relation, p.object});
  return out;
}

std::vector<TripleJudgement> judge_sentence(const std::vector<Triple>& gold,
                                            const std::vector<Triple>& pred) {
  const std::set<Triple> g(gold.begin(), gold.end());
  const std::set<Triple> p(pred.begin(), pred.end());
  std::vector<TripleJudgement> out;
  for (const auto& t : p) {
    if (g.count(t)) continue;
    bool pair_match = false, position_match = false;
    for (const auto& gt : g) {
      if (gt.subject == t.subject && gt.object == t.object) pair_match = true;
      if (gt.relation == t.relation &&
          (gt.subject == t.subject || gt.object == t.object))
        position_match = true;
    }
    if (pair_match)
      out.push_back({t, "wrong-relation"});
    else if (position_match)
      out.push_back({t, "wrong-position"});
    else
      out.push_back({t, "spurious"});
  }
  for (const auto& t : g)
    if (!p.count(t)) out.push_back({t, "missed"});
  return out;
}

namespace {

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

json counts_json(const PrfCounts& c) {
  return json{{"gold", c.gold},       {"predicted", c.predicted},
              {"correct", c.correct}, {"precision", c.precision()},
              {"recall", c.recall()}, {"f1", c.f1()}};
}

json report_to_json(const EvalReport& r) {
  json j;
  j["counts"] = {{"gold", r.counts.gold},
                 {"predicted", r.counts.predicted},
                 {"correct", r.counts.correct}};
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["mean_forward_ceiling"] = r.mean_forward_ceiling;
  j["per_relation"] = json::object();
  for (const auto& [label, c] : r.per_relation) j["per_relation"][label] = counts_json(c);
  j["per_overlap"] = json::object();
  for (const auto& [label, c] : r.per_overlap) j["per_overlap"][label] = counts_json(c);
  return j;
}

}  // namespace

std::string eval_report_json(const EvalReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::string format_ablation_table(const std::vector<AblationRow>& rows,
                                  std::uint64_t seed) {
  std::size_t width = 12;
  for (const auto& row : rows) width = std::max(width, row.label.size() + 2);
  std::ostringstream os;
  os << "# ablation (shared seed " << seed << ")\n";
  os << std::left << std::setw(static_cast<int>(width)) << "model"
     << std::right << std::setw(8) << "recall" << std::setw(11) << "precision"
     << std::setw(8) << "f1" << std::setw(9) << "ceiling" << "\n";
  for (const auto& row : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << row.label << std::right
       << std::setw(8) << fmt3(row.report.recall) << std::setw(11)
       << fmt3(row.report.precision) << std::setw(8) << fmt3(row.report.f1)
       << std::setw(9) << fmt3(row.report.mean_forward_ceiling) << "\n";
  }
  return os.str();
}

std::string ablation_report_json(const std::vector<AblationRow>& rows,
                                 std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["rows"] = json::array();
  for (const auto& row : rows) {
    json r = report_to_json(row.report);
    r["model"] = row.label;
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

}  // namespace dpn
