#pragma once

// Binary checkpoint container: a JSON header (config, optimizer scalars,
// scheduler state, per-epoch metrics) followed by raw little-endian f64
// arrays. Loading reproduces training bit-exactly: epoch shuffles are derived
// from (run seed, epoch index), so no generator state needs to be stored.

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "seqrecall/trainer.hpp"

namespace seqrecall {

struct Checkpoint {
  RunRecord run;
  std::string vocab_hash;  // links the checkpoint to the vocabulary it was trained with
};

namespace detail {

inline uint64_t bits_of(double x) { return std::bit_cast<uint64_t>(x); }
inline double double_of(uint64_t b) { return std::bit_cast<double>(b); }

inline void write_raw(std::ofstream& out, const double* data, int64_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * static_cast<int64_t>(sizeof(double))));
}

inline void read_raw(std::ifstream& in, double* data, int64_t count, const std::string& path) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * static_cast<int64_t>(sizeof(double))));
  if (!in) throw IntegrityError("truncated checkpoint: " + path);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'S', 'Q', 'R', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const RunRecord& run = ckpt.run;
  nlohmann::json h;
  h["model"] = {{"V", run.params.config.V},
                {"d", run.params.config.d},
                {"seed", run.params.config.seed},
                {"init_scale", run.params.config.init_scale}};
  h["run_seed"] = run.run_seed;
  h["seed_index"] = run.seed_index;
  h["epochs_done"] = run.epochs_done;
  h["stop_reason"] =
      run.stop_reason ? nlohmann::json(stop_reason_name(*run.stop_reason)) : nlohmann::json();
  h["adam"] = {{"lr_bits", detail::bits_of(run.adam.lr)},
               {"beta1", run.adam.beta1},
               {"beta2", run.adam.beta2},
               {"eps", run.adam.eps},
               {"step_count", run.adam.step_count}};
  h["plateau"] = {{"best_val_loss_bits", detail::bits_of(run.plateau.best_val_loss)},
                  {"epochs_since_improvement", run.plateau.epochs_since_improvement},
                  {"halvings", run.plateau.halvings},
                  {"patience", run.plateau.patience}};
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : run.metrics) {
    metrics.push_back({m.epoch, detail::bits_of(m.train_loss), detail::bits_of(m.val_loss),
                       detail::bits_of(m.val_acc), detail::bits_of(m.test_acc),
                       detail::bits_of(m.lr)});
  }
  h["metrics"] = metrics;
  h["vocab_hash"] = ckpt.vocab_hash;

  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  detail::write_raw(out, run.params.E.data(), run.params.E.size());
  detail::write_raw(out, run.params.W_x.data(), run.params.W_x.size());
  detail::write_raw(out, run.params.W_h.data(), run.params.W_h.size());
  detail::write_raw(out, run.params.b.data(), run.params.b.size());
  detail::write_raw(out, run.adam.m_Wx.data(), run.adam.m_Wx.size());
  detail::write_raw(out, run.adam.v_Wx.data(), run.adam.v_Wx.size());
  detail::write_raw(out, run.adam.m_Wh.data(), run.adam.m_Wh.size());
  detail::write_raw(out, run.adam.v_Wh.data(), run.adam.v_Wh.size());
  detail::write_raw(out, run.adam.m_b.data(), run.adam.m_b.size());
  detail::write_raw(out, run.adam.v_b.data(), run.adam.v_b.size());
  if (!out) throw IntegrityError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IntegrityError("not a checkpoint file: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version in " + path);
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (1ull << 30)) throw IntegrityError("corrupt checkpoint header: " + path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IntegrityError("truncated checkpoint: " + path);
  nlohmann::json h = nlohmann::json::parse(header);

  Checkpoint ckpt;
  RunRecord& run = ckpt.run;
  ModelConfig mc;
  mc.V = h.at("model").at("V").get<int32_t>();
  mc.d = h.at("model").at("d").get<int>();
  mc.seed = h.at("model").at("seed").get<uint64_t>();
  mc.init_scale = h.at("model").at("init_scale").get<double>();
  run.run_seed = h.at("run_seed").get<uint64_t>();
  run.seed_index = h.at("seed_index").get<int>();
  run.epochs_done = h.at("epochs_done").get<int>();
  if (!h.at("stop_reason").is_null()) {
    const std::string sr = h.at("stop_reason").get<std::string>();
    run.stop_reason = sr == "perfect_validation" ? StopReason::kPerfectValidation
                                                 : StopReason::kEpochCap;
  }
  run.adam.lr = detail::double_of(h.at("adam").at("lr_bits").get<uint64_t>());
  run.adam.beta1 = h.at("adam").at("beta1").get<double>();
  run.adam.beta2 = h.at("adam").at("beta2").get<double>();
  run.adam.eps = h.at("adam").at("eps").get<double>();
  run.adam.step_count = h.at("adam").at("step_count").get<int64_t>();
  run.plateau.best_val_loss =
      detail::double_of(h.at("plateau").at("best_val_loss_bits").get<uint64_t>());
  run.plateau.epochs_since_improvement = h.at("plateau").at("epochs_since_improvement").get<int>();
  run.plateau.halvings = h.at("plateau").at("halvings").get<int>();
  run.plateau.patience = h.at("plateau").at("patience").get<int>();
  for (const auto& row : h.at("metrics")) {
    EpochMetrics m;
    m.epoch = row.at(0).get<int>();
    m.train_loss = detail::double_of(row.at(1).get<uint64_t>());
    m.val_loss = detail::double_of(row.at(2).get<uint64_t>());
    m.val_acc = detail::double_of(row.at(3).get<uint64_t>());
    m.test_acc = detail::double_of(row.at(4).get<uint64_t>());
    m.lr = detail::double_of(row.at(5).get<uint64_t>());
    run.metrics.push_back(m);
  }
  ckpt.vocab_hash = h.value("vocab_hash", "");

  run.params.config = mc;
  run.params.E.resize(mc.V, mc.d);
  run.params.W_x.resize(4 * mc.d, mc.d);
  run.params.W_h.resize(4 * mc.d, mc.d);
  run.params.b.resize(4 * mc.d);
  detail::read_raw(in, run.params.E.data(), run.params.E.size(), path);
  detail::read_raw(in, run.params.W_x.data(), run.params.W_x.size(), path);
  detail::read_raw(in, run.params.W_h.data(), run.params.W_h.size(), path);
  detail::read_raw(in, run.params.b.data(), run.params.b.size(), path);
  run.adam.m_Wx.resize(4 * mc.d, mc.d);
  run.adam.v_Wx.resize(4 * mc.d, mc.d);
  run.adam.m_Wh.resize(4 * mc.d, mc.d);
  run.adam.v_Wh.resize(4 * mc.d, mc.d);
  run.adam.m_b.resize(4 * mc.d);
  run.adam.v_b.resize(4 * mc.d);
  detail::read_raw(in, run.adam.m_Wx.data(), run.adam.m_Wx.size(), path);
  detail::read_raw(in, run.adam.v_Wx.data(), run.adam.v_Wx.size(), path);
  detail::read_raw(in, run.adam.m_Wh.data(), run.adam.m_Wh.size(), path);
  detail::read_raw(in, run.adam.v_Wh.data(), run.adam.v_Wh.size(), path);
  detail::read_raw(in, run.adam.m_b.data(), run.adam.m_b.size(), path);
  detail::read_raw(in, run.adam.v_b.data(), run.adam.v_b.size(), path);

  if (!run.params.E.allFinite() || !run.params.W_x.allFinite() || !run.params.W_h.allFinite() ||
      !run.params.b.allFinite())
    throw IntegrityError("checkpoint contains non-finite parameters: " + path);
  return ckpt;
}

}  // namespace seqrecall
