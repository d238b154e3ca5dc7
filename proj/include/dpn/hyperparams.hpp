#pragma once

#include <string>
#include <vector>

#include "dpn/errors.hpp"
#include "dpn/tensor.hpp"

namespace dpn {

// Architecture dimensions. Defaults are the published configuration: 256/512
// hidden units, 8 heads x 32 units, CNN windows 3/4/5 with 100 filters total,
// 300-dim word vectors, 50-dim char and type embeddings, dropout 0.1,
// loss weighting alpha 0.6.
struct Hyperparams {
  Index word_dim = 300;
  Index char_dim = 50;
  Index entity_type_dim = 50;
  std::vector<Index> cnn_filter_sizes = {3, 4, 5};
  Index cnn_total_filters = 100;
  Index encoder_hidden = 256;
  Index decoder_hidden = 512;
  Index heads = 8;
  Index head_dim = 32;
  double dropout = 0.1;
  double alpha = 0.6;

  Index word_embed_dim() const { return word_dim + cnn_total_filters; }
  Index entity_embed_dim() const { return 2 * cnn_total_filters + entity_type_dim; }
  Index context_dim() const { return 2 * encoder_hidden; }
  Index attn_out_dim() const { return heads * head_dim; }  // width of O rows

  // Near-even split of the filter budget across window sizes (34/33/33 at
  // the defaults), remainder to the smaller windows first.
  std::vector<Index> filter_split() const {
    const Index k = static_cast<Index>(cnn_filter_sizes.size());
    std::vector<Index> out;
    Index base = cnn_total_filters / k, extra = cnn_total_filters % k;
    for (Index i = 0; i < k; ++i) out.push_back(base + (i < extra ? 1 : 0));
    return out;
  }

  void validate() const {
    auto positive = [](Index v, const char* name) {
      if (v <= 0) throw ConfigError(std::string("hyperparams: ") + name + " must be > 0");
    };
    positive(word_dim, "word_dim");
    positive(char_dim, "char_dim");
    positive(entity_type_dim, "entity_type_dim");
    positive(cnn_total_filters, "cnn_total_filters");
    positive(encoder_hidden, "encoder_hidden");
    positive(decoder_hidden, "decoder_hidden");
    positive(heads, "heads");
    positive(head_dim, "head_dim");
    if (cnn_filter_sizes.empty())
      throw ConfigError("hyperparams: no CNN filter sizes");
    for (Index w : cnn_filter_sizes) positive(w, "cnn filter size");
    if (cnn_total_filters < static_cast<Index>(cnn_filter_sizes.size()))
      throw ConfigError("hyperparams: fewer filters than window sizes");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("hyperparams: dropout must be in [0, 1)");
    if (alpha <= 0.0 || alpha >= 1.0)
      throw ConfigError("hyperparams: alpha must be in (0, 1)");
    // head slicing must tile the query/key sources exactly
    if (encoder_hidden % heads != 0)
      throw ConfigError("hyperparams: heads must divide encoder_hidden");
    if (context_dim() % heads != 0)
      throw ConfigError("hyperparams: heads must divide the context width");
    if (decoder_hidden % heads != 0)
      throw ConfigError("hyperparams: heads must divide decoder_hidden");
  }
};

}  // namespace dpn
