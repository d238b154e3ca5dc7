#pragma once

#include <string>
#include <vector>

#include "dpn/decoder.hpp"
#include "dpn/encoder.hpp"
#include "dpn/grad_check.hpp"
#include "dpn/loss.hpp"

namespace dpn {

struct GradCheckSuiteLine {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckSuiteLine> lines;
  bool all_pass = true;
};

namespace detail {

// The micro instance used for the end-to-end check: 3 tokens, 2 entities,
// 1 triple, desk-size dimensions.
inline Hyperparams gradcheck_hyper() {
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
  return h;
}

inline Example gradcheck_example() {
  Example ex;
  ex.tokens = {"alice", "works", "acme"};
  ex.entities = {{0, 1, "PER"}, {2, 3, "ORG"}};
  ex.triples = {{0, "works_at", 1}};
  return ex;
}

inline Vocab gradcheck_vocab() {
  Example extra;
  extra.tokens = {"bob", "visits", "acme", "daily"};
  extra.entities = {{0, 1, "PER"}, {2, 3, "ORG"}};
  extra.triples = {{0, "visits", 1}};
  return build_vocabs({gradcheck_example(), extra});
}

}  // namespace detail

// Finite-difference check of every differentiable primitive plus the full
// encoder + dual decoder + loss on a micro instance, at tolerance `tol`.
inline GradCheckSuiteResult run_gradcheck_suite(double tol = 1e-4, double eps = 1e-5) {
  GradCheckSuiteResult result;
  auto record = [&](const std::string& name, const GradCheckReport& report) {
    const bool ok = report.pass(tol);
    result.lines.push_back({name, report.max_rel_err, ok});
    result.all_pass = result.all_pass && ok;
  };
  auto check = [&](const std::string& name, auto setup) {
    ParameterSet<double> ps;
    std::mt19937 rng(derive_seed(1234, static_cast<std::uint32_t>(result.lines.size())));
    auto f = setup(ps, rng);
    record(name, grad_check(f, ps, eps));
  };
  using F = std::function<Tensor<double>()>;

  check("matmul", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto a = ps.add("a", {3, 4}, Init::kGlorot, rng);
    auto b = ps.add("b", {4, 2}, Init::kGlorot, rng);
    return [=] { return sum(mul(matmul(a, b), matmul(a, b))); };
  });
  check("add_broadcast", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto a = ps.add("a", {3, 4}, Init::kGlorot, rng);
    auto b = ps.add("b", {4}, Init::kGlorot, rng);
    return [=] { return sum(mul(add(a, b), add(a, b))); };
  });
  check("mul_sub_scale", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto a = ps.add("a", {6}, Init::kGlorot, rng);
    auto b = ps.add("b", {6}, Init::kGlorot, rng);
    return [=] { return sum(scale(mul(a, sub(a, b)), 1.7)); };
  });
  check("activations", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto x = ps.add("x", {8}, Init::kGlorot, rng);
    return [=] { return mean(add(tanh(x), add(sigmoid(x), mul(relu(x), relu(x))))); };
  });
  check("softmax_rows_masked", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto x = ps.add("x", {3, 5}, Init::kGlorot, rng);
    std::vector<std::uint8_t> valid(15, 1);
    valid[1] = valid[8] = 0;
    return [=] {
      auto y = softmax_rows(x, valid);
      return sum(mul(y, y));
    };
  });
  check("concat_split", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto a = ps.add("a", {2, 3}, Init::kGlorot, rng);
    auto b = ps.add("b", {2, 3}, Init::kGlorot, rng);
    return [=] {
      auto parts = split(concat<double>({a, b}, 1), 3, 1);
      auto rows = std::vector<Tensor<double>>{row(parts[0], 0), row(parts[2], 1)};
      return sum(mul(stack_rows(rows), stack_rows(rows)));
    };
  });
  check("average", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto a = ps.add("a", {5}, Init::kGlorot, rng);
    auto b = ps.add("b", {5}, Init::kGlorot, rng);
    return [=] { return sum(mul(average<double>({a, b}), a)); };
  });
  check("embedding_lookup", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto table = ps.add("table", {5, 3}, Init::kGlorot, rng);
    return [=] {
      auto picked = embedding_lookup(table, {0, 2, 2, 4});
      return sum(mul(picked, picked));
    };
  });
  check("conv1d_maxpool", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto seq = ps.add("seq", {6, 3}, Init::kGlorot, rng);
    auto filt = ps.add("filt", {3, 3, 4}, Init::kGlorot, rng);
    auto bias = ps.add("bias", {4}, Init::kGlorot, rng);
    return [=] {
      auto pooled = conv1d_maxpool(seq, filt, bias);
      return sum(mul(pooled, pooled));
    };
  });
  check("lstm_cell", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto wi = ps.add("wi", {4, 20}, Init::kGlorot, rng);
    auto wr = ps.add("wr", {5, 20}, Init::kGlorot, rng);
    auto b = ps.add("b", {20}, Init::kGlorot, rng);
    auto x = ps.add("x", {4}, Init::kGlorot, rng);
    auto h0 = ps.add("h0", {5}, Init::kGlorot, rng);
    auto c0 = ps.add("c0", {5}, Init::kGlorot, rng);
    return [=] {
      LstmWeights<double> w{wi, wr, b};
      auto [h1, c1] = lstm_cell(x, h0, c0, w);
      auto [h2, c2] = lstm_cell(x, h1, c1, w);
      return add(sum(mul(h2, h2)), sum(c2));
    };
  });
  check("dropout_fixed_mask", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto x = ps.add("x", {12}, Init::kGlorot, rng);
    return [=] {
      std::mt19937 mask_rng(99);  // same mask on every rebuild
      auto d = dropout(x, 0.4, true, mask_rng);
      return sum(mul(d, d));
    };
  });
  check("cross_entropy", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto logits = ps.add("logits", {7}, Init::kGlorot, rng);
    return [=] { return cross_entropy(logits, 3); };
  });
  check("neg_log_prob_at", [](ParameterSet<double>& ps, std::mt19937& rng) -> F {
    auto x = ps.add("x", {6}, Init::kGlorot, rng);
    return [=] { return neg_log_prob_at(softmax_rows(x), 2); };
  });

  const auto vocab = detail::gradcheck_vocab();
  const auto ex = detail::gradcheck_example();
  const auto targets = compute_pointer_targets(ex);
  for (auto kind : {AttentionKind::kMulti, AttentionKind::kSingle}) {
    auto model = build_model<double>(detail::gradcheck_hyper(), vocab, kind, true, 3);
    std::mt19937 rng(1);
    auto f = [&]() {
      auto enc = encode(model, ex, vocab, false, rng);
      auto fwd = decode(model, enc, Direction::kObjects, false, rng);
      auto bwd = decode(model, enc, Direction::kSubjects, false, rng);
      return compute_loss(fwd, &bwd, targets, vocab, 0.6).total;
    };
    record("model/" + attention_name(kind), grad_check(f, model.params, eps, 60));
  }
  return result;
}

}  // namespace dpn
