#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dpn/checkpoint.hpp"
#include "dpn/config.hpp"
#include "dpn/evaluation.hpp"
#include "dpn/loss.hpp"

namespace dpn {

struct EpochStats {
  long epoch = 0;
  double train_loss = 0;
  bool has_dev = false;
  double dev_precision = 0, dev_recall = 0, dev_f1 = 0;
};

struct TrainResult {
  Checkpoint best;         // best dev F1 (== final when no dev set)
  Checkpoint final_state;  // exact state at the last completed epoch
  std::vector<EpochStats> history;
  long best_epoch = 0;
};

// Pretrained word vectors, whitespace-separated "word v1 ... vD" lines.
// Missing words keep their random rows; a dimension mismatch is fatal.
// Returns the number of initialized rows.
template <class Scalar>
Index load_pretrained_words(Model<Scalar>& m, const Vocab& vocab, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vectors '" + path + "'");
  std::string line;
  Index loaded = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<Scalar> values;
    double v;
    while (ss >> v) values.push_back(Scalar(v));
    if (static_cast<Index>(values.size()) != m.hyper.word_dim)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": vector for '" + word +
                        "' has " + std::to_string(values.size()) + " dims, table has " +
                        std::to_string(m.hyper.word_dim));
    auto it = vocab.word_to_id.find(word);
    if (it == vocab.word_to_id.end()) continue;  // best effort
    for (Index d = 0; d < m.hyper.word_dim; ++d)
      m.word_table.value()[it->second * m.hyper.word_dim + d] =
          values[static_cast<std::size_t>(d)];
    ++loaded;
  }
  return loaded;
}

namespace detail {

inline std::string rng_state_string(const std::mt19937& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(std::mt19937& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (is.fail()) throw ParseError("cannot restore rng state");
}

}  // namespace detail

// Sentence-level training loop: shuffle, encode, decode both directions,
// weighted cross-entropy, backward, clip, Adam. Dev micro-F1 gates early
// stopping; the best-dev state is kept alongside the exact final state so
// training can resume bit-identically. `stop` (optional) is consulted after
// each epoch and ends training when it returns true.
using StopCallback = std::function<bool(const EpochStats&, const Model<float>&)>;

inline TrainResult train(const std::vector<Example>& train_set,
                         const std::vector<Example>& dev_set, const FullConfig& cfg,
                         const Vocab& vocab, const Checkpoint* resume = nullptr,
                         std::ostream* log = nullptr, const std::string& glove_path = "",
                         const StopCallback& stop = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");
  const std::string fingerprint = vocab_hash(vocab);

  Model<float> model = resume ? model_from_checkpoint(*resume, vocab)
                              : build_model<float>(cfg.hyper, vocab, cfg.attn, cfg.dual,
                                                   cfg.train.seed);
  if (!resume && !glove_path.empty()) {
    const Index n = load_pretrained_words(model, vocab, glove_path);
    if (log) *log << "loaded " << n << " pretrained word vectors\n";
  }

  Adam<float> optimizer(cfg.train.learning_rate, cfg.train.beta1, cfg.train.beta2,
                        cfg.train.adam_eps);
  std::mt19937 data_rng(derive_seed(cfg.train.seed, 2));
  std::mt19937 dropout_rng(derive_seed(cfg.train.seed, 3));
  long start_epoch = 0;
  if (resume) {
    restore_optimizer(*resume, model, optimizer);
    detail::restore_rng(data_rng, resume->data_rng_state);
    detail::restore_rng(dropout_rng, resume->dropout_rng_state);
    start_epoch = resume->epoch;
  }

  // Precompute supervision; sentences without entities cannot be scanned.
  std::vector<std::size_t> usable;
  std::vector<PointerTargets> targets(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].entities.empty()) continue;
    targets[i] = compute_pointer_targets(train_set[i]);
    usable.push_back(i);
  }
  if (usable.empty()) throw ValidationError("train: no sentence has entities");

  model.params.zero_grads();
  TrainResult result;
  double best_f1 = -1;
  Index stale = 0;
  long last_epoch = start_epoch;

  for (long epoch = start_epoch + 1; epoch <= cfg.train.max_epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    shuffle_inplace(order, data_rng);

    double loss_sum = 0;
    Index pending = 0;
    auto flush = [&] {
      if (pending == 0) return;
      if (pending > 1) model.params.scale_grads(1.0f / float(pending));
      if (cfg.train.clip_norm > 0) {
        const double norm = model.params.grad_norm();
        if (norm > cfg.train.clip_norm)
          model.params.scale_grads(float(cfg.train.clip_norm / norm));
      }
      optimizer.step(model.params);
      pending = 0;
    };

    for (std::size_t k = 0; k < order.size(); ++k) {
      const Example& ex = train_set[order[k]];
      auto enc = encode(model, ex, vocab, /*training=*/true, dropout_rng);
      auto fwd = decode(model, enc, Direction::kObjects, true, dropout_rng);
      DecoderOutput<float> bwd;
      if (cfg.dual) bwd = decode(model, enc, Direction::kSubjects, true, dropout_rng);
      auto parts = compute_loss(fwd, cfg.dual ? &bwd : nullptr, targets[order[k]], vocab,
                                cfg.hyper.alpha);
      const double loss_value = double(parts.total.item());
      if (!std::isfinite(loss_value))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", sentence " + std::to_string(k));
      loss_sum += loss_value;
      backward(parts.total);
      if (++pending >= cfg.train.batch_size) flush();
    }
    flush();
    last_epoch = epoch;

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / double(order.size());
    if (!dev_set.empty()) {
      auto report = evaluate_model(model, dev_set, vocab);
      st.has_dev = true;
      st.dev_precision = report.precision;
      st.dev_recall = report.recall;
      st.dev_f1 = report.f1;
      if (report.f1 > best_f1) {
        best_f1 = report.f1;
        result.best = snapshot_checkpoint(model, &optimizer, epoch,
                                          detail::rng_state_string(data_rng),
                                          detail::rng_state_string(dropout_rng),
                                          fingerprint);
        result.best_epoch = epoch;
        stale = 0;
      } else {
        ++stale;
      }
    }
    result.history.push_back(st);
    if (log) {
      *log << "epoch " << epoch << " loss " << st.train_loss;
      if (st.has_dev) *log << " dev_f1 " << st.dev_f1;
      *log << "\n";
    }
    if (st.has_dev && stale >= cfg.train.patience) break;
    if (stop && stop(st, model)) break;
  }

  result.final_state = snapshot_checkpoint(model, &optimizer, last_epoch,
                                           detail::rng_state_string(data_rng),
                                           detail::rng_state_string(dropout_rng),
                                           fingerprint);
  if (best_f1 < 0) {
    result.best = result.final_state;
    result.best_epoch = last_epoch;
  }
  return result;
}

// Per-epoch history as CSV (plot-ready).
inline std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,dev_precision,dev_recall,dev_f1\n";
  os.precision(17);
  for (const auto& st : history) {
    os << st.epoch << ',' << st.train_loss << ',';
    if (st.has_dev)
      os << st.dev_precision << ',' << st.dev_recall << ',' << st.dev_f1;
    else
      os << ",,";
    os << '\n';
  }
  return os.str();
}

}  // namespace dpn
