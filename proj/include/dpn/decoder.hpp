#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dpn/encoder.hpp"

namespace dpn {

// Decoder state for one entity: the pointer distribution over (NULL +
// entities) with the self slot masked, relation logits, and the argmax
// readouts.
template <class Scalar>
struct DecodedEntity {
  Tensor<Scalar> pointer;     // [m+1], head-averaged for multi-head
  Tensor<Scalar> rel_logits;  // [R], pre-relu
  Index pred_slot = 0;
  Index pred_relation = 0;
  std::vector<VecX<Scalar>> head_dists;  // multi-head only
};

template <class Scalar>
struct DecoderOutput {
  Direction direction = Direction::kObjects;
  std::vector<DecodedEntity<Scalar>> entities;  // indexed by entity order
};

struct PredictedTriple {
  Index subject = 0;
  std::string relation;
  Index object = 0;
  double confidence = 1.0;
  std::string source;  // forward | backward | both
};

using TripleSet = std::vector<PredictedTriple>;

namespace detail {

template <class Scalar>
VecX<Scalar> softmax_values(const VecX<Scalar>& logits) {
  VecX<Scalar> p = (logits - logits.maxCoeff()).exp();
  p /= p.sum();
  return p;
}

}  // namespace detail

// Pointer scan of one direction. The object decoder walks entities in
// sentence order, the subject decoder in reverse; each step points into O
// with its own slot masked. Decoding reads only entity encodings, never
// previous predictions.
template <class Scalar>
DecoderOutput<Scalar> decode(const Model<Scalar>& m, const Encoded<Scalar>& enc,
                             Direction direction, bool training, std::mt19937& rng) {
  const DecoderParams<Scalar>& dec =
      direction == Direction::kObjects ? m.dec_obj : m.dec_sub;
  if (direction == Direction::kSubjects && !m.dual)
    throw ConfigError("decode: model was built forward-only");
  const Index count = enc.entity_states.dim(0);
  const Index slots = count + 1;
  const Tensor<Scalar>& attended = enc.attended;
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(m.hyper.head_dim));

  // Multi-head key/value projections over O are shared across steps.
  std::vector<Tensor<Scalar>> keys, values;
  if (m.attn == AttentionKind::kMulti) {
    auto o_slices = split(attended, m.hyper.heads, 1);
    for (Index j = 0; j < m.hyper.heads; ++j) {
      keys.push_back(matmul(o_slices[static_cast<std::size_t>(j)],
                            dec.key_proj[static_cast<std::size_t>(j)]));
      values.push_back(matmul(o_slices[static_cast<std::size_t>(j)],
                              dec.value_proj[static_cast<std::size_t>(j)]));
    }
  }

  DecoderOutput<Scalar> out;
  out.direction = direction;
  out.entities.resize(static_cast<std::size_t>(count));

  Tensor<Scalar> state = Tensor<Scalar>::zeros({m.hyper.decoder_hidden});
  Tensor<Scalar> cell = Tensor<Scalar>::zeros({m.hyper.decoder_hidden});
  for (Index step = 0; step < count; ++step) {
    const Index t = direction == Direction::kObjects ? step : count - 1 - step;
    auto input = concat<Scalar>(
        {row(enc.entity_embeds, t), row(enc.entity_states, t)}, 0);
    auto [h, c] = lstm_cell(input, state, cell, dec.lstm);
    state = h;
    cell = c;
    auto g = dropout(h, m.hyper.dropout, training, rng);

    std::vector<std::uint8_t> valid(static_cast<std::size_t>(slots), 1);
    valid[static_cast<std::size_t>(t + 1)] = 0;  // an entity never points at itself

    DecodedEntity<Scalar> entry;
    if (m.attn == AttentionKind::kSingle) {
      auto hidden = tanh(add(matmul(attended, dec.score_w_ctx),
                             matmul(g, dec.score_w_state)));
      auto scores = matmul(hidden, dec.score_v);  // [m+1]
      entry.pointer = softmax_rows(scores, valid);
      auto ctx = matmul(entry.pointer, attended);  // attention-weighted sum over O
      auto rel_hidden =
          tanh(add(matmul(ctx, dec.rel_w_ctx), matmul(g, dec.rel_w_state)));
      entry.rel_logits = matmul(rel_hidden, dec.rel_u);
      entry.pred_relation = argmax_index(entry.rel_logits.value());
    } else {
      auto g_slices = split(g, m.hyper.heads, 0);
      std::vector<Tensor<Scalar>> dists, head_outs;
      for (Index j = 0; j < m.hyper.heads; ++j) {
        auto q = matmul(g_slices[static_cast<std::size_t>(j)], dec.query_proj);
        auto scores = scale(matmul(keys[static_cast<std::size_t>(j)], q), inv_sqrt_d);
        auto dist = softmax_rows(scores, valid);
        entry.head_dists.push_back(dist.value());
        dists.push_back(dist);
        head_outs.push_back(matmul(dist, values[static_cast<std::size_t>(j)]));
      }
      entry.pointer = average(dists);
      entry.rel_logits = add(matmul(concat(head_outs, 0), dec.rel_w), dec.rel_b);
      // the relation readout applies relu before argmax; ties fall to the
      // lowest index, so all-negative logits resolve to NONE
      VecX<Scalar> relu_vals = entry.rel_logits.value().max(Scalar(0));
      entry.pred_relation = argmax_index(relu_vals);
    }
    entry.pred_slot = argmax_index(entry.pointer.value());
    out.entities[static_cast<std::size_t>(t)] = std::move(entry);
  }
  return out;
}

// Union of the two decoders' pointer predictions. Forward contributes
// (t, rel, target), backward (target, rel, t); exact duplicates merge, and a
// subject-object pair claimed with two different relations keeps the higher
// relation confidence (forward wins ties).
template <class Scalar>
TripleSet assemble_triples(const DecoderOutput<Scalar>& fwd, const DecoderOutput<Scalar>& bwd,
                           const Vocab& vocab) {
  struct Candidate {
    PredictedTriple triple;
    double rel_conf = 0;
  };
  std::map<std::pair<Index, Index>, Candidate> by_pair;

  auto offer = [&](const DecodedEntity<Scalar>& e, Index t, bool forward) {
    if (e.pred_slot == 0 || e.pred_relation == Vocab::kNoneRelation) return;
    const Index partner = e.pred_slot - 1;
    Candidate cand;
    cand.triple.subject = forward ? t : partner;
    cand.triple.object = forward ? partner : t;
    cand.triple.relation = vocab.relation_label(e.pred_relation);
    const auto rel_probs = detail::softmax_values(e.rel_logits.value());
    cand.rel_conf = double(rel_probs[e.pred_relation]);
    cand.triple.confidence = double(e.pointer.value()[e.pred_slot]) * cand.rel_conf;
    cand.triple.source = forward ? "forward" : "backward";
    const auto key = std::make_pair(cand.triple.subject, cand.triple.object);
    auto it = by_pair.find(key);
    if (it == by_pair.end()) {
      by_pair.emplace(key, std::move(cand));
    } else if (it->second.triple.relation == cand.triple.relation) {
      it->second.triple.source = "both";
      it->second.triple.confidence =
          std::max(it->second.triple.confidence, cand.triple.confidence);
    } else if (cand.rel_conf > it->second.rel_conf) {
      by_pair[key] = std::move(cand);
    }
  };

  for (Index t = 0; t < static_cast<Index>(fwd.entities.size()); ++t)
    offer(fwd.entities[static_cast<std::size_t>(t)], t, true);
  for (Index t = 0; t < static_cast<Index>(bwd.entities.size()); ++t)
    offer(bwd.entities[static_cast<std::size_t>(t)], t, false);

  TripleSet out;
  for (auto& [key, cand] : by_pair) out.push_back(std::move(cand.triple));
  return out;
}

// Best recall any forward-only decoder can reach: one object slot per
// subject, so multi-object subjects lose all but one triple.
inline double forward_only_ceiling(const Example& ex) {
  if (ex.triples.empty()) return 1.0;
  std::map<Index, Index> outdegree;
  for (const auto& t : ex.triples) ++outdegree[t.subject];
  // sum of min(1, outdegree) == number of distinct subjects
  return double(outdegree.size()) / double(ex.triples.size());
}

}  // namespace dpn
