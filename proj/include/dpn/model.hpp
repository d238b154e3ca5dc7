#pragma once

#include <random>
#include <string>
#include <vector>

#include "dpn/dataset.hpp"
#include "dpn/hyperparams.hpp"
#include "dpn/ops.hpp"
#include "dpn/params.hpp"
#include "dpn/random.hpp"

namespace dpn {

enum class AttentionKind { kSingle, kMulti };
enum class Direction { kObjects, kSubjects };

inline std::string attention_name(AttentionKind k) {
  return k == AttentionKind::kSingle ? "single" : "multi";
}

inline AttentionKind attention_from_name(const std::string& s) {
  if (s == "single") return AttentionKind::kSingle;
  if (s == "multi") return AttentionKind::kMulti;
  throw ConfigError("unknown attention kind '" + s + "' (expected single|multi)");
}

// Per-application CNN bank: one (filters, bias) pair per window size.
template <class Scalar>
struct CnnBank {
  std::vector<Tensor<Scalar>> filters;  // [w x d_in x f_i]
  std::vector<Tensor<Scalar>> biases;   // [f_i]
};

// One pointer decoder: a dedicated LSTM plus either the additive scoring
// stack (single-head) or per-head projections (multi-head).
template <class Scalar>
struct DecoderParams {
  LstmWeights<Scalar> lstm;
  // single-head additive attention
  Tensor<Scalar> score_w_ctx, score_w_state, score_v;
  Tensor<Scalar> rel_w_ctx, rel_w_state, rel_u;
  // multi-head scaled dot-product attention
  Tensor<Scalar> query_proj, rel_w, rel_b;
  std::vector<Tensor<Scalar>> key_proj, value_proj;
};

template <class Scalar>
struct Model {
  Hyperparams hyper;
  AttentionKind attn = AttentionKind::kMulti;
  bool dual = true;
  Index n_relations = 0;

  ParameterSet<Scalar> params;

  Tensor<Scalar> word_table, char_table, type_table;
  CnnBank<Scalar> word_char_cnn, ent_word_cnn, ent_char_cnn;
  LstmWeights<Scalar> ctx_fwd, ctx_bwd, ent_lstm;
  Tensor<Scalar> attn_query_proj, attn_out_w, attn_out_b;
  std::vector<Tensor<Scalar>> attn_key_proj, attn_value_proj;
  Tensor<Scalar> null_row;
  DecoderParams<Scalar> dec_obj, dec_sub;
};

namespace detail {

template <class Scalar>
LstmWeights<Scalar> add_lstm(ParameterSet<Scalar>& ps, const std::string& prefix,
                             Index d_in, Index hidden, std::mt19937& rng) {
  LstmWeights<Scalar> w;
  w.w_input = ps.add(prefix + ".w_input", {d_in, 4 * hidden}, Init::kGlorot, rng);
  w.w_recur = ps.add(prefix + ".w_recur", {hidden, 4 * hidden}, Init::kGlorot, rng);
  w.bias = ps.add(prefix + ".bias", {4 * hidden}, Init::kZeros, rng);
  for (Index i = hidden; i < 2 * hidden; ++i)
    w.bias.value()[i] = Scalar(1);  // forget gate starts open
  return w;
}

template <class Scalar>
CnnBank<Scalar> add_cnn(ParameterSet<Scalar>& ps, const std::string& prefix, Index d_in,
                        const Hyperparams& h, std::mt19937& rng) {
  CnnBank<Scalar> bank;
  const auto split = h.filter_split();
  for (std::size_t i = 0; i < h.cnn_filter_sizes.size(); ++i) {
    const std::string tag = prefix + ".w" + std::to_string(h.cnn_filter_sizes[i]);
    bank.filters.push_back(
        ps.add(tag, {h.cnn_filter_sizes[i], d_in, split[i]}, Init::kGlorot, rng));
    bank.biases.push_back(ps.add(tag + "_bias", {split[i]}, Init::kZeros, rng));
  }
  return bank;
}

}  // namespace detail

// Deterministic construction: parameter creation order defines the
// checkpoint manifest, so this function is the single source of that order.
template <class Scalar>
Model<Scalar> build_model(const Hyperparams& hyper, const Vocab& vocab, AttentionKind attn,
                          bool dual, std::uint64_t seed) {
  hyper.validate();
  if (vocab.relation_count() < 2)
    throw ConfigError("build_model: vocabulary has no relations besides NONE");
  Model<Scalar> m;
  m.hyper = hyper;
  m.attn = attn;
  m.dual = dual;
  m.n_relations = vocab.relation_count();

  std::mt19937 rng(derive_seed(seed, 0));
  auto& ps = m.params;

  m.word_table = ps.add("enc.word_table", {vocab.word_count(), hyper.word_dim},
                        Init::kGlorot, rng);
  m.char_table = ps.add("enc.char_table", {vocab.char_count(), hyper.char_dim},
                        Init::kGlorot, rng);
  m.type_table = ps.add("enc.type_table", {vocab.type_count(), hyper.entity_type_dim},
                        Init::kGlorot, rng);
  m.word_char_cnn = detail::add_cnn(ps, "enc.word_char_cnn", hyper.char_dim, hyper, rng);
  m.ent_word_cnn = detail::add_cnn(ps, "enc.ent_word_cnn", hyper.word_dim, hyper, rng);
  m.ent_char_cnn = detail::add_cnn(ps, "enc.ent_char_cnn", hyper.char_dim, hyper, rng);
  m.ctx_fwd = detail::add_lstm(ps, "enc.ctx_fwd", hyper.word_embed_dim(),
                               hyper.encoder_hidden, rng);
  m.ctx_bwd = detail::add_lstm(ps, "enc.ctx_bwd", hyper.word_embed_dim(),
                               hyper.encoder_hidden, rng);
  m.ent_lstm = detail::add_lstm(ps, "enc.ent_lstm", hyper.entity_embed_dim(),
                                hyper.encoder_hidden, rng);

  const Index query_slice = hyper.encoder_hidden / hyper.heads;
  const Index kv_slice = hyper.context_dim() / hyper.heads;
  m.attn_query_proj =
      ps.add("enc.attn.query_proj", {query_slice, hyper.head_dim}, Init::kGlorot, rng);
  for (Index j = 0; j < hyper.heads; ++j)
    m.attn_key_proj.push_back(ps.add("enc.attn.key_proj" + std::to_string(j),
                                     {kv_slice, hyper.head_dim}, Init::kGlorot, rng));
  for (Index j = 0; j < hyper.heads; ++j)
    m.attn_value_proj.push_back(ps.add("enc.attn.value_proj" + std::to_string(j),
                                       {kv_slice, hyper.head_dim}, Init::kGlorot, rng));
  m.attn_out_w = ps.add("enc.attn.out_w", {hyper.attn_out_dim(), hyper.attn_out_dim()},
                        Init::kGlorot, rng);
  m.attn_out_b = ps.add("enc.attn.out_b", {hyper.attn_out_dim()}, Init::kZeros, rng);
  m.null_row = ps.add("enc.null_row", {hyper.attn_out_dim()}, Init::kGlorot, rng);

  auto add_decoder = [&](const std::string& prefix) {
    DecoderParams<Scalar> dec;
    dec.lstm = detail::add_lstm(ps, prefix + ".lstm",
                                hyper.entity_embed_dim() + hyper.encoder_hidden,
                                hyper.decoder_hidden, rng);
    const Index d_o = hyper.attn_out_dim();
    if (attn == AttentionKind::kSingle) {
      dec.score_w_ctx =
          ps.add(prefix + ".score_w_ctx", {d_o, hyper.decoder_hidden}, Init::kGlorot, rng);
      dec.score_w_state = ps.add(prefix + ".score_w_state",
                                 {hyper.decoder_hidden, hyper.decoder_hidden},
                                 Init::kGlorot, rng);
      dec.score_v = ps.add(prefix + ".score_v", {hyper.decoder_hidden}, Init::kGlorot, rng);
      dec.rel_w_ctx =
          ps.add(prefix + ".rel_w_ctx", {d_o, hyper.decoder_hidden}, Init::kGlorot, rng);
      dec.rel_w_state = ps.add(prefix + ".rel_w_state",
                               {hyper.decoder_hidden, hyper.decoder_hidden},
                               Init::kGlorot, rng);
      dec.rel_u = ps.add(prefix + ".rel_u", {hyper.decoder_hidden, m.n_relations},
                         Init::kGlorot, rng);
    } else {
      const Index g_slice = hyper.decoder_hidden / hyper.heads;
      const Index o_slice = d_o / hyper.heads;
      dec.query_proj =
          ps.add(prefix + ".query_proj", {g_slice, hyper.head_dim}, Init::kGlorot, rng);
      for (Index j = 0; j < hyper.heads; ++j)
        dec.key_proj.push_back(ps.add(prefix + ".key_proj" + std::to_string(j),
                                      {o_slice, hyper.head_dim}, Init::kGlorot, rng));
      for (Index j = 0; j < hyper.heads; ++j)
        dec.value_proj.push_back(ps.add(prefix + ".value_proj" + std::to_string(j),
                                        {o_slice, hyper.head_dim}, Init::kGlorot, rng));
      dec.rel_w = ps.add(prefix + ".rel_w", {d_o, m.n_relations}, Init::kGlorot, rng);
      dec.rel_b = ps.add(prefix + ".rel_b", {m.n_relations}, Init::kZeros, rng);
    }
    return dec;
  };

  m.dec_obj = add_decoder("dec.obj");
  if (dual) m.dec_sub = add_decoder("dec.sub");
  return m;
}

}  // namespace dpn
