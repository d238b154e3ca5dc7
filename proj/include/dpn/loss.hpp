#pragma once

#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/decoder.hpp"

namespace dpn {

// Weighted cross-entropy over both decoders:
//   total = (alpha/2)(CE_pos_sub + CE_pos_obj)
//         + ((1-alpha)/2)(CE_rel_sub + CE_rel_obj)
// with each CE averaged over entities. Position terms read the pointer
// distribution directly; relation terms are softmax CE over the logits.
// Forward-only models drop the subject terms and renormalize:
//   total = alpha*CE_pos_obj + (1-alpha)*CE_rel_obj.
template <class Scalar>
struct LossParts {
  Tensor<Scalar> total;
  double pos_obj = 0, pos_sub = 0;  // per-term component values
  double rel_obj = 0, rel_sub = 0;
};

namespace detail {

template <class Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> direction_loss(
    const DecoderOutput<Scalar>& out, const std::vector<PointerSlot>& slots,
    const Vocab& vocab) {
  const Index count = static_cast<Index>(out.entities.size());
  if (count != static_cast<Index>(slots.size()))
    throw ShapeError("loss: decoder output and targets disagree on entity count");
  Tensor<Scalar> pos_sum, rel_sum;
  for (Index t = 0; t < count; ++t) {
    const auto& entity = out.entities[static_cast<std::size_t>(t)];
    const auto& slot = slots[static_cast<std::size_t>(t)];
    auto pos_term = neg_log_prob_at(entity.pointer, slot.pos);
    auto rel_term = cross_entropy(entity.rel_logits, vocab.relation_id(slot.relation));
    pos_sum = t == 0 ? pos_term : add(pos_sum, pos_term);
    rel_sum = t == 0 ? rel_term : add(rel_sum, rel_term);
  }
  const Scalar inv = Scalar(1) / Scalar(count);
  return {scale(pos_sum, inv), scale(rel_sum, inv)};
}

}  // namespace detail

template <class Scalar>
LossParts<Scalar> compute_loss(const DecoderOutput<Scalar>& fwd,
                               const DecoderOutput<Scalar>* bwd,
                               const PointerTargets& targets, const Vocab& vocab,
                               double alpha) {
  LossParts<Scalar> parts;
  auto [pos_obj, rel_obj] = detail::direction_loss(fwd, targets.forward, vocab);
  parts.pos_obj = double(pos_obj.item());
  parts.rel_obj = double(rel_obj.item());
  if (bwd) {
    auto [pos_sub, rel_sub] = detail::direction_loss(*bwd, targets.backward, vocab);
    parts.pos_sub = double(pos_sub.item());
    parts.rel_sub = double(rel_sub.item());
    parts.total = add(scale(add(pos_sub, pos_obj), Scalar(alpha / 2)),
                      scale(add(rel_sub, rel_obj), Scalar((1 - alpha) / 2)));
  } else {
    parts.total =
        add(scale(pos_obj, Scalar(alpha)), scale(rel_obj, Scalar(1 - alpha)));
  }
  return parts;
}

}  // namespace dpn
