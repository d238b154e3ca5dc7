#include "dpn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpn/dataset.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native little-endian floats");

namespace dpn {

using nlohmann::json;

namespace {

json hyper_to_json(const Hyperparams& h) {
  return json{{"word_dim", h.word_dim},
              {"char_dim", h.char_dim},
              {"entity_type_dim", h.entity_type_dim},
              {"cnn_filter_sizes", h.cnn_filter_sizes},
              {"cnn_total_filters", h.cnn_total_filters},
              {"encoder_hidden", h.encoder_hidden},
              {"decoder_hidden", h.decoder_hidden},
              {"heads", h.heads},
              {"head_dim", h.head_dim},
              {"dropout", h.dropout},
              {"alpha", h.alpha}};
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.word_dim = j.at("word_dim").get<Index>();
  h.char_dim = j.at("char_dim").get<Index>();
  h.entity_type_dim = j.at("entity_type_dim").get<Index>();
  h.cnn_filter_sizes = j.at("cnn_filter_sizes").get<std::vector<Index>>();
  h.cnn_total_filters = j.at("cnn_total_filters").get<Index>();
  h.encoder_hidden = j.at("encoder_hidden").get<Index>();
  h.decoder_hidden = j.at("decoder_hidden").get<Index>();
  h.heads = j.at("heads").get<Index>();
  h.head_dim = j.at("head_dim").get<Index>();
  h.dropout = j.at("dropout").get<double>();
  h.alpha = j.at("alpha").get<double>();
  return h;
}

void append_values(Checkpoint& ckpt, const std::string& name, const Shape& shape,
                   const VecX<float>& values) {
  CheckpointEntry entry{name, shape, ckpt.payload.size() * sizeof(float)};
  ckpt.manifest.push_back(std::move(entry));
  const std::size_t old = ckpt.payload.size();
  ckpt.payload.resize(old + static_cast<std::size_t>(values.size()));
  std::memcpy(ckpt.payload.data() + old, values.data(), values.size() * sizeof(float));
}

}  // namespace

const float* Checkpoint::find(const std::string& name, Index expected_numel) const {
  for (const auto& e : manifest) {
    if (e.name != name) continue;
    if (numel(e.shape) != expected_numel)
      throw ValidationError("checkpoint entry '" + name + "' has shape " +
                            shape_str(e.shape) + ", expected " +
                            std::to_string(expected_numel) + " values");
    return payload.data() + e.byte_offset / sizeof(float);
  }
  return nullptr;
}

Checkpoint snapshot_checkpoint(const Model<float>& model, const Adam<float>* optimizer,
                               long epoch, const std::string& data_rng_state,
                               const std::string& dropout_rng_state,
                               const std::string& vocab_fingerprint) {
  Checkpoint ckpt;
  ckpt.hyper = model.hyper;
  ckpt.attn = model.attn;
  ckpt.dual = model.dual;
  ckpt.vocab_fingerprint = vocab_fingerprint;
  ckpt.epoch = epoch;
  ckpt.data_rng_state = data_rng_state;
  ckpt.dropout_rng_state = dropout_rng_state;
  for (const auto& [name, t] : model.params.items())
    append_values(ckpt, name, t.shape(), t.value());
  if (optimizer && optimizer->step_count() > 0) {
    ckpt.adam_step = optimizer->step_count();
    const auto& items = model.params.items();
    for (std::size_t i = 0; i < items.size(); ++i)
      append_values(ckpt, "opt.m." + items[i].first, items[i].second.shape(),
                    optimizer->first_moments()[i]);
    for (std::size_t i = 0; i < items.size(); ++i)
      append_values(ckpt, "opt.v." + items[i].first, items[i].second.shape(),
                    optimizer->second_moments()[i]);
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header;
  header["version"] = ckpt.version;
  header["hyperparams"] = hyper_to_json(ckpt.hyper);
  header["attention"] = attention_name(ckpt.attn);
  header["dual"] = ckpt.dual;
  header["vocab_hash"] = ckpt.vocab_fingerprint;
  header["epoch"] = ckpt.epoch;
  header["adam_step"] = ckpt.adam_step;
  header["rng"] = {{"data", ckpt.data_rng_state}, {"dropout", ckpt.dropout_rng_state}};
  header["manifest"] = json::array();
  for (const auto& e : ckpt.manifest)
    header["manifest"].push_back(
        {{"name", e.name}, {"shape", e.shape}, {"offset", e.byte_offset}});

  const std::string head = header.dump();
  std::string blob;
  blob.reserve(8 + 8 + head.size() + ckpt.payload.size() * sizeof(float));
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = head.size();
  blob.append(reinterpret_cast<const char*>(&len), sizeof(len));
  blob.append(head);
  blob.append(reinterpret_cast<const char*>(ckpt.payload.data()),
              ckpt.payload.size() * sizeof(float));
  atomic_write_file(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(path + ": not a checkpoint (bad magic)");
  std::uint64_t head_len = 0;
  if (!in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len)))
    throw ParseError(path + ": truncated header length");
  std::string head(head_len, '\0');
  if (!in.read(head.data(), static_cast<std::streamsize>(head_len)))
    throw ParseError(path + ": truncated header");

  Checkpoint ckpt;
  try {
    const json j = json::parse(head);
    ckpt.version = j.at("version").get<int>();
    if (ckpt.version != kCheckpointVersion)
      throw ParseError(path + ": unsupported checkpoint version " +
                       std::to_string(ckpt.version));
    ckpt.hyper = hyper_from_json(j.at("hyperparams"));
    ckpt.attn = attention_from_name(j.at("attention").get<std::string>());
    ckpt.dual = j.at("dual").get<bool>();
    ckpt.vocab_fingerprint = j.at("vocab_hash").get<std::string>();
    ckpt.epoch = j.at("epoch").get<long>();
    ckpt.adam_step = j.at("adam_step").get<long>();
    ckpt.data_rng_state = j.at("rng").at("data").get<std::string>();
    ckpt.dropout_rng_state = j.at("rng").at("dropout").get<std::string>();
    for (const auto& je : j.at("manifest")) {
      CheckpointEntry e;
      e.name = je.at("name").get<std::string>();
      e.shape = je.at("shape").get<Shape>();
      e.byte_offset = je.at("offset").get<std::uint64_t>();
      ckpt.manifest.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }

  std::string rest((std::istreambuf_iterator<char>(in)), {});
  if (rest.size() % sizeof(float) != 0)
    throw ParseError(path + ": payload size " + std::to_string(rest.size()) +
                     " is not a whole number of floats");
  ckpt.payload.resize(rest.size() / sizeof(float));
  std::memcpy(ckpt.payload.data(), rest.data(), rest.size());

  // manifest entries must tile the payload exactly
  std::uint64_t expect = 0;
  for (const auto& e : ckpt.manifest) {
    if (e.byte_offset != expect)
      throw ParseError(path + ": manifest entry '" + e.name + "' at offset " +
                       std::to_string(e.byte_offset) + ", expected " +
                       std::to_string(expect));
    expect += static_cast<std::uint64_t>(numel(e.shape)) * sizeof(float);
  }
  if (expect != rest.size())
    throw ParseError(path + ": manifest covers " + std::to_string(expect) +
                     " bytes but payload holds " + std::to_string(rest.size()));
  return ckpt;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt, const Vocab& vocab) {
  if (ckpt.vocab_fingerprint != vocab_hash(vocab))
    throw ValidationError("vocabulary hash mismatch: checkpoint was trained with '" +
                          ckpt.vocab_fingerprint + "', supplied vocab hashes to '" +
                          vocab_hash(vocab) + "'");
  Model<float> model =
      build_model<float>(ckpt.hyper, vocab, ckpt.attn, ckpt.dual, /*seed=*/0);
  for (const auto& [name, t] : model.params.items()) {
    const float* src = ckpt.find(name, t.numel());
    if (!src)
      throw ValidationError("checkpoint is missing parameter '" + name + "'");
    Tensor<float> p = t;
    std::memcpy(p.value().data(), src, static_cast<std::size_t>(t.numel()) * sizeof(float));
  }
  return model;
}

void restore_optimizer(const Checkpoint& ckpt, const Model<float>& model,
                       Adam<float>& optimizer) {
  if (ckpt.adam_step == 0) return;  // snapshot had no optimizer state
  std::vector<VecX<float>> m, v;
  for (const auto& [name, t] : model.params.items()) {
    const float* pm = ckpt.find("opt.m." + name, t.numel());
    const float* pv = ckpt.find("opt.v." + name, t.numel());
    if (!pm || !pv)
      throw ValidationError("checkpoint lacks optimizer state for '" + name + "'");
    VecX<float> vm(t.numel()), vv(t.numel());
    std::memcpy(vm.data(), pm, static_cast<std::size_t>(t.numel()) * sizeof(float));
    std::memcpy(vv.data(), pv, static_cast<std::size_t>(t.numel()) * sizeof(float));
    m.push_back(std::move(vm));
    v.push_back(std::move(vv));
  }
  optimizer.restore(ckpt.adam_step, std::move(m), std::move(v));
}

}  // namespace dpn
