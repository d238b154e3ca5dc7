#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpn/adam.hpp"
#include "dpn/model.hpp"

namespace dpn {

// Checkpoint file layout: 8-byte magic "DPNRELX1", a little-endian u64 byte
// length, that many bytes of UTF-8 JSON header (version, hyperparams,
// attention/dual flags, vocab hash, epoch, rng states, manifest), then the
// flat payload as little-endian 32-bit floats in manifest order. Model
// parameters come first; Adam moments follow under "opt.m." / "opt.v."
// names so training can resume bit-exactly.
inline constexpr char kCheckpointMagic[8] = {'D', 'P', 'N', 'R', 'E', 'L', 'X', '1'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::uint64_t byte_offset = 0;
};

struct Checkpoint {
  int version = kCheckpointVersion;
  Hyperparams hyper;
  AttentionKind attn = AttentionKind::kMulti;
  bool dual = true;
  std::string vocab_fingerprint;
  long epoch = 0;
  long adam_step = 0;
  std::string data_rng_state;
  std::string dropout_rng_state;
  std::vector<CheckpointEntry> manifest;
  std::vector<float> payload;

  // Flat values for one manifest entry; null when absent.
  const float* find(const std::string& name, Index expected_numel) const;
};

// Captures the full training state: parameters, optimizer moments, rng
// streams. Pass a null optimizer for inference-only snapshots.
Checkpoint snapshot_checkpoint(const Model<float>& model, const Adam<float>* optimizer,
                               long epoch, const std::string& data_rng_state,
                               const std::string& dropout_rng_state,
                               const std::string& vocab_fingerprint);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model and overwrites its parameters from the payload.
// Refuses a vocabulary whose fingerprint disagrees with the checkpoint.
Model<float> model_from_checkpoint(const Checkpoint& ckpt, const Vocab& vocab);

// Restores optimizer moments saved alongside the parameters.
void restore_optimizer(const Checkpoint& ckpt, const Model<float>& model,
                       Adam<float>& optimizer);

}  // namespace dpn
