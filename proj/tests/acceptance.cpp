// Acceptance suite: one numbered check per run argument (all when none).
// Each criterion prints a single PASS/FAIL line; the exit code is the number
// of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "dpn/evaluation.hpp"
#include "dpn/gradcheck_suite.hpp"
#include "dpn/train.hpp"

using namespace dpn;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- criterion 1: gradient fidelity -----------------------------------------

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  auto suite = run_gradcheck_suite(1e-4, 1e-5);
  const double elapsed = seconds_since(t0);
  double worst = 0;
  for (const auto& line : suite.lines) worst = std::max(worst, line.max_rel_err);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu checks, worst rel err %.2e, %.1fs",
                suite.lines.size(), worst, elapsed);
  return {suite.all_pass && elapsed < 60.0, buf};
}

// --- criterion 2: distribution invariants ------------------------------------

Outcome criterion_distributions() {
  std::mt19937 meta(2024);
  long checked = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    Hyperparams h;
    h.word_dim = 6 + 2 * uniform_below(meta, 4);
    h.char_dim = 4 + uniform_below(meta, 4);
    h.entity_type_dim = 3 + uniform_below(meta, 4);
    h.cnn_filter_sizes = {2, 3};
    h.cnn_total_filters = 4 + uniform_below(meta, 4);
    h.heads = 2;
    h.encoder_hidden = 8 + 4 * uniform_below(meta, 3);   // divisible by 2
    h.decoder_hidden = 16 + 4 * uniform_below(meta, 3);  // divisible by 2
    h.head_dim = 4 + uniform_below(meta, 3);
    h.dropout = 0.0;

    SynthSpec spec;
    spec.n_sentences = 1;
    spec.vocab_size = 24;
    spec.relations = {"r1", "r2", "r3"};
    const int roll = uniform_below(meta, 4);
    spec.pattern_mix = {{roll == 0   ? "normal"
                         : roll == 1 ? "seo_1_to_n"
                         : roll == 2 ? "seo_n_to_1"
                                     : "chain",
                         1.0}};
    spec.max_entities = 3 + uniform_below(meta, 2);
    spec.seed = meta();
    const auto sentence = generate_synthetic(spec)[0];
    const auto vocab = build_vocabs({sentence});

    const auto kind = draw % 2 ? AttentionKind::kSingle : AttentionKind::kMulti;
    auto model = build_model<float>(h, vocab, kind, true, meta());
    std::mt19937 rng(1);
    auto enc = encode(model, sentence, vocab, false, rng);

    auto check_dist = [&](const VecX<float>& d, Index self_slot) {
      if (std::abs(double(d.sum()) - 1.0) > 1e-6) return false;
      if (d.minCoeff() < 0.0f) return false;
      if (self_slot >= 0 && d[self_slot] != 0.0f) return false;
      ++checked;
      return true;
    };

    for (const auto& heads : enc.attn_heads)
      for (const auto& d : heads)
        if (!check_dist(d, -1)) return {false, "encoder head distribution violated"};

    for (auto dir : {Direction::kObjects, Direction::kSubjects}) {
      auto out = decode(model, enc, dir, false, rng);
      for (Index t = 0; t < static_cast<Index>(out.entities.size()); ++t) {
        const auto& e = out.entities[static_cast<std::size_t>(t)];
        if (!check_dist(e.pointer.value(), t + 1))
          return {false, "pointer distribution violated"};
        for (const auto& hd : e.head_dists)
          if (!check_dist(hd, t + 1)) return {false, "pointer head violated"};
      }
    }
  }
  return {true, "1000 draws, " + std::to_string(checked) + " distributions clean"};
}

// --- criterion 3: metric oracle ----------------------------------------------

Outcome criterion_metric_oracle() {
  auto f1_of = [](double p, double r) {
    return p + r == 0 ? 0.0 : 2.0 * p * r / (p + r);
  };
  const double f1_ace = f1_of(0.787, 0.832);
  const double f1_nyt = f1_of(0.749, 0.820);
  if (f1_ace < 0.808 || f1_ace > 0.809) return {false, "ACE anchor off"};
  if (std::abs(f1_nyt - 0.783) > 0.001) return {false, "NYT anchor off"};

  std::mt19937 rng(77);
  const std::vector<std::string> labels = {"a", "b", "c", "d"};
  for (int corpus = 0; corpus < 20; ++corpus) {
    std::vector<std::vector<Triple>> gold, pred;
    const Index sentences = 1 + uniform_below(rng, 40);
    for (Index s = 0; s < sentences; ++s) {
      const Index entities = 2 + uniform_below(rng, 5);
      auto draw = [&](Index count) {
        std::set<Triple> set;
        for (Index k = 0; k < count; ++k) {
          const Index subject = uniform_below(rng, static_cast<std::uint32_t>(entities));
          Index object = uniform_below(rng, static_cast<std::uint32_t>(entities));
          if (object == subject) object = (object + 1) % entities;
          set.insert({subject, labels[uniform_below(rng, 4)], object});
        }
        return std::vector<Triple>(set.begin(), set.end());
      };
      gold.push_back(draw(uniform_below(rng, 5)));
      pred.push_back(draw(uniform_below(rng, 5)));
    }
    auto report = micro_prf(gold, pred);
    long g = 0, p = 0, c = 0;  // independent set-intersection count
    for (std::size_t i = 0; i < gold.size(); ++i) {
      std::set<Triple> gs(gold[i].begin(), gold[i].end());
      std::set<Triple> ps(pred[i].begin(), pred[i].end());
      g += static_cast<long>(gs.size());
      p += static_cast<long>(ps.size());
      for (const auto& t : ps) c += gs.count(t) ? 1 : 0;
    }
    const double precision = p ? double(c) / double(p) : 0.0;
    const double recall = g ? double(c) / double(g) : 0.0;
    if (std::abs(report.precision - precision) > 1e-12 ||
        std::abs(report.recall - recall) > 1e-12 ||
        std::abs(report.f1 - f1_of(precision, recall)) > 1e-12)
      return {false, "brute-force disagreement on corpus " + std::to_string(corpus)};
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "20 corpora to 1e-12; F1 anchors %.4f / %.4f", f1_ace,
                f1_nyt);
  return {true, buf};
}

// --- criterion 4: structural dual-decoder claim -------------------------------

std::vector<Example> star_corpus(Index n, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_sentences = n;
  spec.vocab_size = 40;
  spec.relations = {"rel_0", "rel_1", "rel_2"};
  spec.pattern_mix = {{"seo_1_to_n", 1.0}};
  spec.max_entities = 3;  // forces exactly 1-to-2 stars
  spec.seed = seed;
  return generate_synthetic(spec);
}

Outcome criterion_dual_structural() {
  const auto t0 = std::chrono::steady_clock::now();
  auto corpus = star_corpus(100, 404);
  auto vocab = build_vocabs(corpus);

  FullConfig cfg;  // published defaults
  cfg.train.seed = 404;
  cfg.train.max_epochs = 200;

  // forward-only: structurally capped at recall 0.5 no matter the training
  FullConfig fwd_cfg = cfg;
  fwd_cfg.dual = false;
  fwd_cfg.train.max_epochs = 6;
  auto fwd_run = train(corpus, {}, fwd_cfg, vocab);
  auto fwd_model = model_from_checkpoint(fwd_run.best, vocab);
  auto fwd_report = evaluate_model(fwd_model, corpus, vocab, /*dual_eval=*/false);
  if (fwd_report.mean_forward_ceiling != 0.5)
    return {false, "ceiling arithmetic is not 0.5"};
  if (fwd_report.recall > 0.5 + 1e-9)
    return {false, "forward-only recall exceeded the structural ceiling"};

  auto untrained = build_model<float>(cfg.hyper, vocab, AttentionKind::kMulti, false, 9);
  if (evaluate_model(untrained, corpus, vocab, false).recall > 0.5 + 1e-9)
    return {false, "untrained forward-only recall exceeded the ceiling"};

  // dual: trains past the ceiling
  double dual_recall = 0;
  auto stop = [&](const EpochStats&, const Model<float>& m) {
    dual_recall = evaluate_model(m, corpus, vocab).recall;
    return dual_recall >= 0.95 || seconds_since(t0) > 560.0;
  };
  train(corpus, {}, cfg, vocab, nullptr, nullptr, "", stop);
  const double elapsed = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "fwd-only recall %.3f <= 0.5; dual recall %.3f; %.0fs",
                fwd_report.recall, dual_recall, elapsed);
  return {dual_recall >= 0.95 && elapsed <= 600.0, buf};
}

// --- criterion 5: desk-scale learnability -------------------------------------

Outcome criterion_learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.n_sentences = 360;  // 300 train + 60 held out
  spec.vocab_size = 60;
  spec.relations = {"rel_0", "rel_1", "rel_2", "rel_3", "rel_4"};
  spec.pattern_mix = {{"normal", 0.5}, {"seo_1_to_n", 0.25}, {"seo_n_to_1", 0.25}};
  spec.max_entities = 3;
  spec.seed = 42;
  auto corpus = generate_synthetic(spec);
  auto split = split_dataset(corpus, {300.0 / 360.0, 60.0 / 360.0, 0.0}, 42);

  auto vocab = build_vocabs(split.train);
  FullConfig cfg;  // published defaults
  cfg.train.seed = 42;
  cfg.train.max_epochs = 200;

  double train_f1 = 0, dev_f1 = 0;
  long epochs = 0;
  auto stop = [&](const EpochStats& st, const Model<float>& m) {
    epochs = st.epoch;
    dev_f1 = st.dev_f1;
    if (st.dev_f1 >= 0.80) {
      train_f1 = evaluate_model(m, split.train, vocab).f1;
      if (train_f1 >= 0.95) return true;
    }
    return seconds_since(t0) > 840.0;
  };
  train(split.train, split.dev, cfg, vocab, nullptr, nullptr, "", stop);
  const double elapsed = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "train F1 %.3f, held-out F1 %.3f after %ld epochs, %.0fs", train_f1,
                dev_f1, epochs, elapsed);
  return {train_f1 >= 0.95 && dev_f1 >= 0.80 && epochs <= 200 && elapsed <= 900.0, buf};
}

// --- criterion 6: target-construction soundness --------------------------------

Outcome criterion_targets() {
  SynthSpec spec;
  spec.n_sentences = 1000;
  spec.vocab_size = 40;
  spec.relations = {"r1", "r2", "r3"};
  spec.pattern_mix = {
      {"normal", 0.25}, {"seo_1_to_n", 0.25}, {"seo_n_to_1", 0.25}, {"chain", 0.25}};
  spec.max_entities = 5;
  spec.seed = 606;
  auto corpus = generate_synthetic(spec);
  for (const auto& ex : corpus) {
    auto targets = compute_pointer_targets(ex);
    if (targets.coverage != 1.0)
      return {false, "coverage below 1.0 on pattern " + ex.pattern};
    const std::set<Triple> gold(ex.triples.begin(), ex.triples.end());
    std::set<Triple> rebuilt;
    for (Index t = 0; t < static_cast<Index>(targets.forward.size()); ++t) {
      const auto& f = targets.forward[static_cast<std::size_t>(t)];
      const auto& b = targets.backward[static_cast<std::size_t>(t)];
      if (f.pos == t + 1 || b.pos == t + 1) return {false, "self-pointing target"};
      if (f.pos != 0) rebuilt.insert({t, f.relation, f.pos - 1});
      if (b.pos != 0) rebuilt.insert({b.pos - 1, b.relation, t});
    }
    for (const auto& t : rebuilt)
      if (!gold.count(t)) return {false, "reconstructed triple not in gold"};
    if (rebuilt.size() != gold.size())
      return {false, "reconstruction incomplete despite coverage 1.0"};
  }
  return {true, "1000 sentences over all four patterns, coverage 1.0"};
}

// --- criterion 7: determinism and persistence ----------------------------------

Outcome criterion_determinism() {
  namespace fs = std::filesystem;
  SynthSpec spec;
  spec.n_sentences = 10;
  spec.vocab_size = 30;
  spec.relations = {"r1", "r2"};
  spec.pattern_mix = {{"normal", 0.5}, {"seo_1_to_n", 0.5}};
  spec.max_entities = 3;
  spec.seed = 13;
  auto corpus = generate_synthetic(spec);
  auto vocab = build_vocabs(corpus);

  FullConfig cfg;  // full-size model, tiny corpus
  cfg.train.seed = 13;
  cfg.train.max_epochs = 3;

  auto a = train(corpus, {}, cfg, vocab);
  auto b = train(corpus, {}, cfg, vocab);
  if (a.final_state.payload.size() != b.final_state.payload.size() ||
      std::memcmp(a.final_state.payload.data(), b.final_state.payload.data(),
                  a.final_state.payload.size() * sizeof(float)) != 0)
    return {false, "identical seeds produced different checkpoints"};

  const auto dir = fs::temp_directory_path() / "dpn_acceptance";
  fs::create_directories(dir);
  const auto path = (dir / "determinism.ckpt").string();
  save_checkpoint(path, a.final_state);
  auto loaded = load_checkpoint(path);
  if (loaded.payload.size() != a.final_state.payload.size() ||
      std::memcmp(loaded.payload.data(), a.final_state.payload.data(),
                  loaded.payload.size() * sizeof(float)) != 0)
    return {false, "checkpoint did not round-trip bitwise"};

  FullConfig cfg8 = cfg;
  cfg8.train.max_epochs = 8;
  auto full = train(corpus, {}, cfg8, vocab);
  auto resumed = train(corpus, {}, cfg8, vocab, &loaded);
  if (resumed.history.size() != 5) return {false, "resume ran a wrong epoch count"};
  for (std::size_t i = 0; i < 5; ++i)
    if (std::abs(resumed.history[i].train_loss - full.history[i + 3].train_loss) > 1e-12)
      return {false, "resumed trajectory diverged at epoch " +
                         std::to_string(resumed.history[i].epoch)};
  return {true, "bit-identical checkpoints; resume matched 5 epochs to 1e-12"};
}

// --- criterion 8: loss weighting ------------------------------------------------

Outcome criterion_loss_weighting() {
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

  SynthSpec spec;
  spec.n_sentences = 5;
  spec.vocab_size = 24;
  spec.relations = {"r1", "r2"};
  spec.pattern_mix = {{"seo_1_to_n", 1.0}};
  spec.max_entities = 3;
  spec.seed = 88;
  auto corpus = generate_synthetic(spec);
  auto vocab = build_vocabs(corpus);
  auto model = build_model<double>(h, vocab, AttentionKind::kMulti, true, 88);

  for (const auto& ex : corpus) {
    auto targets = compute_pointer_targets(ex);
    std::mt19937 rng(1);
    auto enc = encode(model, ex, vocab, false, rng);
    auto fwd = decode(model, enc, Direction::kObjects, false, rng);
    auto bwd = decode(model, enc, Direction::kSubjects, false, rng);
    auto at_06 = compute_loss(fwd, &bwd, targets, vocab, 0.6);
    const double rebuilt = 0.3 * (at_06.pos_sub + at_06.pos_obj) +
                           0.2 * (at_06.rel_sub + at_06.rel_obj);
    if (std::abs(at_06.total.item() - rebuilt) > 1e-9)
      return {false, "alpha=0.6 weighting identity violated"};

    auto at_08 = compute_loss(fwd, &bwd, targets, vocab, 0.8);
    const double pos_06 = 0.3 * (at_06.pos_sub + at_06.pos_obj);
    const double pos_08 = 0.4 * (at_08.pos_sub + at_08.pos_obj);
    if (std::abs(pos_08 - pos_06 * (0.8 / 0.6)) > 1e-12 * std::max(1.0, std::abs(pos_06)))
      return {false, "alpha rescaling is not exactly 0.8/0.6"};
  }
  return {true, "weighting identity and alpha rescaling hold on 5 sentences"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int number;
    const char* title;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "gradient fidelity", criterion_gradients},
      {2, "distribution invariants", criterion_distributions},
      {3, "metric oracle", criterion_metric_oracle},
      {4, "structural dual-decoder claim", criterion_dual_structural},
      {5, "desk-scale learnability", criterion_learnability},
      {6, "target-construction soundness", criterion_targets},
      {7, "determinism and persistence", criterion_determinism},
      {8, "loss weighting", criterion_loss_weighting},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const Outcome outcome = c.run();
    std::printf("[%s] criterion %d (%s): %s\n", outcome.pass ? "PASS" : "FAIL", c.number,
                c.title, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
