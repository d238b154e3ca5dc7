#pragma once

#include <cstdint>
#include <string>

#include "dpn/hyperparams.hpp"
#include "dpn/model.hpp"

namespace dpn {

// Optimization settings. The paper's configuration stops at the
// architecture, so these carry stated conventional defaults: Adam at 1e-3,
// one sentence per step, gradient-norm clip 5, patience 20 on dev F1.
struct TrainConfig {
  double learning_rate = 1e-3;
  Index batch_size = 1;
  Index max_epochs = 200;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Index patience = 20;
  Index min_count = 1;

  void validate() const {
    if (learning_rate <= 0) throw ConfigError("config: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("config: max_epochs must be >= 1");
    if (clip_norm < 0) throw ConfigError("config: clip_norm must be >= 0");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
      throw ConfigError("config: betas must be in (0, 1)");
    if (adam_eps <= 0) throw ConfigError("config: adam_eps must be > 0");
    if (patience < 1) throw ConfigError("config: patience must be >= 1");
    if (min_count < 1) throw ConfigError("config: min_count must be >= 1");
  }
};

struct FullConfig {
  Hyperparams hyper;
  TrainConfig train;
  AttentionKind attn = AttentionKind::kMulti;
  bool dual = true;

  void validate() const {
    hyper.validate();
    train.validate();
  }
};

// key=value lines, one field per line; '#' starts a comment; unknown keys
// are rejected.
FullConfig parse_config_text(const std::string& text, const std::string& origin);
FullConfig parse_config_file(const std::string& path);
std::string render_config(const FullConfig& cfg);

}  // namespace dpn
