// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

// Coded-tensor symbols live in [-1024, 1023].
constexpr int kSymbolMin = -1024;
constexpr int kSymbolMax = 1023;
constexpr int kAlphabet = 2048;
// Range-coder probability resolution. Every symbol keeps at least 1/65536
// mass so any legal value stays decodable under any model.
constexpr uint32_t kProbTotal = 1u << 16;
constexpr int kMaxChannels = 224;
constexpr size_t kModelHeaderBudget = 64;

// Discretized zero-mean Laplace over the symbol alphabet: cumulative
// frequencies summing to kProbTotal plus per-symbol bit costs (Q8) for size
// estimation without encoding.
struct CdfTable {
  std::array<uint32_t, kAlphabet + 1> cum;
  std::array<uint16_t, kAlphabet> cost_q8;

  uint32_t freq(int sym) const { return cum[sym + 1] - cum[sym]; }
};

// Per-channel zero-mean Laplace scales, quantized to the 12-bit wire grid
// (4.8 fixed point, so b in [1/16, ~16] with the fit floor at 1/16). When a
// full per-channel table would blow the 64-byte header budget the channels
// are folded into 16 groups sharing one scale each; the fit then happens at
// group granularity so encoder and decoder see identical statistics.
class LaplaceModel {
 public:
  // Laplace MLE per channel (or per group): b = max(mean |v|, 1/16).
  // `values` is channel-major with values.size() divisible by `channels`.
  static LaplaceModel fit(const std::vector<int16_t>& values, int channels);

  // Builds a model from explicit wire scales (tests, golden vectors).
  static LaplaceModel from_scales(int channels, std::vector<uint16_t> scale_q8);

  int channels() const { return channels_; }
  bool grouped() const { return grouped_; }
  const std::vector<uint16_t>& scales_q8() const { return scale_q8_; }

  uint16_t scale_of_channel(int c) const { return scale_q8_[slot_of_channel(c)]; }
  const CdfTable& table_of_channel(int c) const { return *tables_[slot_of_channel(c)]; }

  std::vector<uint8_t> serialize() const;
  static LaplaceModel deserialize(const uint8_t* data, size_t len);
  static LaplaceModel deserialize(const std::vector<uint8_t>& bytes) {
    return deserialize(bytes.data(), bytes.size());
  }

  bool operator==(const LaplaceModel& o) const {
    return channels_ == o.channels_ && grouped_ == o.grouped_ && scale_q8_ == o.scale_q8_;
  }

  // Exact wire-grid quantization of a raw scale estimate.
  static uint16_t quantize_scale(double b);

  static bool needs_grouping(int channels);

 private:
  LaplaceModel() = default;
  void build_tables();
  int slot_of_channel(int c) const {
    if (c < 0 || c >= channels_) throw ValidationError("channel out of range");
    return grouped_ ? c / group_width() : c;
  }
  int group_width() const { return (channels_ + 15) / 16; }

  int channels_ = 0;
  bool grouped_ = false;
  std::vector<uint16_t> scale_q8_;                        // one per slot
  std::vector<std::shared_ptr<const CdfTable>> tables_;   // parallel to scale_q8_
};

struct Bitstream {
  std::vector<uint8_t> bytes;
  size_t bit_length() const { return bytes.size() * 8; }
};

// Entropy-codes one packet's element list. `channel_ids[k]` is the channel of
// values[k]; the model must cover every channel present. Deterministic,
// lossless, and independent of any other packet.
Bitstream encode_packet(const std::vector<int16_t>& values,
                        const std::vector<uint8_t>& channel_ids, const LaplaceModel& model);

std::vector<int16_t> decode_packet(const Bitstream& bits, const std::vector<uint8_t>& channel_ids,
                                   const LaplaceModel& model);

// Model cross-entropy of the payload in bits: sum over values of
// -log2 P(value | channel model). The coded size never exceeds this by more
// than the coder's constant flush overhead.
double cross_entropy_bits(const std::vector<int16_t>& values,
                          const std::vector<uint8_t>& channel_ids, const LaplaceModel& model);

// Fast pieces for size estimation during rung selection: cost in Q8 bits.
uint64_t payload_cost_q8(const std::vector<int16_t>& values,
                         const std::vector<uint8_t>& channel_ids, const LaplaceModel& model);

// Cost of a whole channel-major tensor (channel of element i is
// i / (values.size() / channels)), without materializing channel ids.
uint64_t tensor_cost_q8(const std::vector<int16_t>& channel_major_values, int channels,
                        const LaplaceModel& model);

}  // namespace shardcast
