#pragma once

#include <random>
#include <string>
#include <vector>

#include "dpn/model.hpp"

namespace dpn {

// Forward-pass products consumed by both decoders. `attn_heads[t][j]` keeps
// the j-th head's distribution over tokens for entity t (inspection only).
template <class Scalar>
struct Encoded {
  Tensor<Scalar> context;        // C: [L x 2*encoder_hidden]
  Tensor<Scalar> entity_states;  // S: [m x encoder_hidden]
  Tensor<Scalar> entity_embeds;  // E: [m x entity_embed_dim]
  Tensor<Scalar> attended;       // O: [(m+1) x d_o], row 0 is the NULL slot
  std::vector<std::vector<VecX<Scalar>>> attn_heads;
};

namespace detail {

// Max-pooled CNN over an embedded sequence: one window size per bank entry,
// pooled outputs concatenated to the full filter budget.
template <class Scalar>
Tensor<Scalar> cnn_encode(const CnnBank<Scalar>& bank, const Tensor<Scalar>& seq) {
  std::vector<Tensor<Scalar>> pooled;
  for (std::size_t i = 0; i < bank.filters.size(); ++i)
    pooled.push_back(conv1d_maxpool(seq, bank.filters[i], bank.biases[i]));
  return concat(pooled, 0);
}

template <class Scalar>
std::vector<Tensor<Scalar>> run_lstm(const LstmWeights<Scalar>& w, Index hidden,
                                     const std::vector<Tensor<Scalar>>& inputs) {
  std::vector<Tensor<Scalar>> states;
  Tensor<Scalar> h = Tensor<Scalar>::zeros({hidden});
  Tensor<Scalar> c = Tensor<Scalar>::zeros({hidden});
  for (const auto& x : inputs) {
    auto [h2, c2] = lstm_cell(x, h, c, w);
    h = h2;
    c = c2;
    states.push_back(h);
  }
  return states;
}

template <class Scalar>
std::vector<Index> char_ids(const Vocab& vocab, const std::string& surface) {
  std::vector<Index> ids;
  for (const auto& cp : utf8_codepoints(surface)) ids.push_back(vocab.char_id(cp));
  return ids;
}

}  // namespace detail

// Per-token embeddings: word-table row plus a char-CNN over the token.
template <class Scalar>
Tensor<Scalar> embed_words(const Model<Scalar>& m, const std::vector<std::string>& tokens,
                           const Vocab& vocab) {
  if (tokens.empty()) throw ValidationError("embed_words: no tokens");
  std::vector<Index> ids;
  for (const auto& t : tokens) ids.push_back(vocab.word_id(t));
  auto word_part = embedding_lookup(m.word_table, ids);  // [L x word_dim]
  std::vector<Tensor<Scalar>> char_parts;
  for (const auto& t : tokens) {
    auto chars = embedding_lookup(m.char_table, detail::char_ids<Scalar>(vocab, t));
    char_parts.push_back(detail::cnn_encode(m.word_char_cnn, chars));
  }
  return concat<Scalar>({word_part, stack_rows(char_parts)}, 1);  // [L x (word_dim+filters)]
}

// Per-entity embeddings: word-level CNN over the mention's word vectors,
// char CNN over its surface, and the type embedding.
template <class Scalar>
Tensor<Scalar> embed_entities(const Model<Scalar>& m, const Example& ex, const Vocab& vocab) {
  if (ex.entities.empty()) throw ValidationError("embed_entities: no entities");
  std::vector<Tensor<Scalar>> rows;
  for (const auto& e : ex.entities) {
    std::vector<Index> word_ids;
    std::string surface;
    for (Index i = e.start; i < e.end; ++i) {
      word_ids.push_back(vocab.word_id(ex.tokens[static_cast<std::size_t>(i)]));
      if (!surface.empty()) surface += ' ';
      surface += ex.tokens[static_cast<std::size_t>(i)];
    }
    auto words = embedding_lookup(m.word_table, word_ids);
    auto word_cnn = detail::cnn_encode(m.ent_word_cnn, words);
    auto chars = embedding_lookup(m.char_table, detail::char_ids<Scalar>(vocab, surface));
    auto char_cnn = detail::cnn_encode(m.ent_char_cnn, chars);
    auto type_row = row(embedding_lookup(m.type_table, {vocab.type_id(e.type)}), 0);
    rows.push_back(concat<Scalar>({word_cnn, char_cnn, type_row}, 0));
  }
  return stack_rows(rows);  // [m x entity_embed_dim]
}

// BiLSTM over token embeddings; per-position concat of both directions.
template <class Scalar>
Tensor<Scalar> encode_context(const Model<Scalar>& m, const Tensor<Scalar>& word_embeds,
                              bool training, std::mt19937& rng) {
  const Index l = word_embeds.dim(0);
  std::vector<Tensor<Scalar>> steps, reversed;
  for (Index i = 0; i < l; ++i) steps.push_back(row(word_embeds, i));
  for (Index i = l - 1; i >= 0; --i) reversed.push_back(row(word_embeds, i));
  auto fwd = detail::run_lstm(m.ctx_fwd, m.hyper.encoder_hidden, steps);
  auto bwd = detail::run_lstm(m.ctx_bwd, m.hyper.encoder_hidden, reversed);
  std::vector<Tensor<Scalar>> rows;
  for (Index i = 0; i < l; ++i)
    rows.push_back(concat<Scalar>(
        {fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(l - 1 - i)]}, 0));
  return dropout(stack_rows(rows), m.hyper.dropout, training, rng);
}

// Forward LSTM over entity embeddings in sentence order.
template <class Scalar>
Tensor<Scalar> encode_entities(const Model<Scalar>& m, const Tensor<Scalar>& entity_embeds,
                               bool training, std::mt19937& rng) {
  const Index count = entity_embeds.dim(0);
  std::vector<Tensor<Scalar>> steps;
  for (Index i = 0; i < count; ++i) steps.push_back(row(entity_embeds, i));
  auto states = detail::run_lstm(m.ent_lstm, m.hyper.encoder_hidden, steps);
  return dropout(stack_rows(states), m.hyper.dropout, training, rng);
}

// Context-to-entity multi-head attention: entity states query the token
// context. Returns one attended vector per entity plus the head
// distributions for inspection.
template <class Scalar>
std::pair<std::vector<Tensor<Scalar>>, std::vector<std::vector<VecX<Scalar>>>>
context_to_entity_attention(const Model<Scalar>& m, const Tensor<Scalar>& context,
                            const Tensor<Scalar>& entity_states) {
  const Index heads = m.hyper.heads;
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(m.hyper.head_dim));
  auto ctx_slices = split(context, heads, 1);
  std::vector<Tensor<Scalar>> keys, values;
  for (Index j = 0; j < heads; ++j) {
    keys.push_back(matmul(ctx_slices[static_cast<std::size_t>(j)],
                          m.attn_key_proj[static_cast<std::size_t>(j)]));
    values.push_back(matmul(ctx_slices[static_cast<std::size_t>(j)],
                            m.attn_value_proj[static_cast<std::size_t>(j)]));
  }
  const Index count = entity_states.dim(0);
  std::vector<Tensor<Scalar>> outputs;
  std::vector<std::vector<VecX<Scalar>>> head_dists(static_cast<std::size_t>(count));
  for (Index t = 0; t < count; ++t) {
    auto query_slices = split(row(entity_states, t), heads, 0);
    std::vector<Tensor<Scalar>> head_outs;
    for (Index j = 0; j < heads; ++j) {
      auto q = matmul(query_slices[static_cast<std::size_t>(j)], m.attn_query_proj);
      auto scores = scale(matmul(keys[static_cast<std::size_t>(j)], q), inv_sqrt_d);
      auto dist = softmax_rows(scores);
      head_dists[static_cast<std::size_t>(t)].push_back(dist.value());
      head_outs.push_back(matmul(dist, values[static_cast<std::size_t>(j)]));
    }
    outputs.push_back(
        relu(add(matmul(concat(head_outs, 0), m.attn_out_w), m.attn_out_b)));
  }
  return {outputs, head_dists};
}

// Full encoder pass. O stacks the learned NULL row above the per-entity
// attention outputs.
template <class Scalar>
Encoded<Scalar> encode(const Model<Scalar>& m, const Example& ex, const Vocab& vocab,
                       bool training, std::mt19937& rng) {
  Encoded<Scalar> enc;
  auto words = embed_words(m, ex.tokens, vocab);
  enc.context = encode_context(m, words, training, rng);
  enc.entity_embeds = embed_entities(m, ex, vocab);
  enc.entity_states = encode_entities(m, enc.entity_embeds, training, rng);
  auto [attended, head_dists] =
      context_to_entity_attention(m, enc.context, enc.entity_states);
  enc.attn_heads = std::move(head_dists);
  std::vector<Tensor<Scalar>> all_rows;
  all_rows.push_back(m.null_row);
  for (auto& o : attended) all_rows.push_back(o);
  enc.attended = stack_rows(all_rows);
  return enc;
}

}  // namespace dpn
