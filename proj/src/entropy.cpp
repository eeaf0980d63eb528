// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "shardcast/entropy.hpp"

namespace shardcast {

namespace {

// Tables are pure functions of the 12-bit wire scale; cache them globally so
// repeated frames don't rebuild 2048-entry CDFs.
std::shared_ptr<const CdfTable> table_for_scale(uint16_t scale_q8) {
  static std::mutex mu;
  static std::map<uint16_t, std::shared_ptr<const CdfTable>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(scale_q8);
    if (it != cache.end()) return it->second;
  }

  auto table = std::make_shared<CdfTable>();
  const double b = static_cast<double>(scale_q8) / 256.0;

  // Laplace mass of each integer bin [s-1/2, s+1/2); tails fold into the
  // edge symbols so the weights sum to 1.
  auto cdf = [b](double x) {
    return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
  };
  std::array<double, kAlphabet> w;
  for (int s = kSymbolMin; s <= kSymbolMax; ++s) {
    double lo = (s == kSymbolMin) ? 0.0 : cdf(s - 0.5);
    double hi = (s == kSymbolMax) ? 1.0 : cdf(s + 0.5);
    w[static_cast<size_t>(s - kSymbolMin)] = hi - lo;
  }

  // One count is reserved per symbol; the rest is apportioned by largest
  // remainder (ties to the lower symbol) so the table is deterministic.
  constexpr uint32_t kSpread = kProbTotal - kAlphabet;
  std::array<uint32_t, kAlphabet> freq;
  std::array<std::pair<double, int>, kAlphabet> frac;
  uint32_t assigned = 0;
  for (int i = 0; i < kAlphabet; ++i) {
    double exact = w[static_cast<size_t>(i)] * kSpread;
    auto fl = static_cast<uint32_t>(exact);
    freq[static_cast<size_t>(i)] = 1 + fl;
    assigned += fl;
    frac[static_cast<size_t>(i)] = {exact - fl, i};
  }
  uint32_t remainder = kSpread - assigned;
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (uint32_t k = 0; k < remainder; ++k) freq[static_cast<size_t>(frac[k].second)] += 1;

  table->cum[0] = 0;
  for (int i = 0; i < kAlphabet; ++i) {
    table->cum[static_cast<size_t>(i) + 1] = table->cum[static_cast<size_t>(i)] + freq[static_cast<size_t>(i)];
    double bits = std::log2(static_cast<double>(kProbTotal) / freq[static_cast<size_t>(i)]);
    table->cost_q8[static_cast<size_t>(i)] =
        static_cast<uint16_t>(std::min(65535.0, std::ceil(bits * 256.0)));
  }

  std::lock_guard<std::mutex> lock(mu);
  auto [it, _] = cache.emplace(scale_q8, std::move(table));
  return it->second;
}

size_t varint_len(uint32_t v) { return v < 128 ? 1 : 2; }

void put_varint(std::vector<uint8_t>& out, uint32_t v) {
  while (v >= 128) {
    out.push_back(static_cast<uint8_t>(0x80 | (v & 0x7f)));
    v >>= 7;
  }
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_varint(const uint8_t* data, size_t len, size_t& pos) {
  uint32_t v = 0;
  int shift = 0;
  while (true) {
    if (pos >= len || shift > 28) throw ParseError("model header: bad varint");
    uint8_t b = data[pos++];
    v |= static_cast<uint32_t>(b & 0x7f) << shift;
    if (!(b & 0x80)) return v;
    shift += 7;
  }
}

}  // namespace

uint16_t LaplaceModel::quantize_scale(double b) {
  if (b < 1.0 / 16.0) b = 1.0 / 16.0;
  long q = std::lround(b * 256.0);
  if (q < 16) q = 16;
  if (q > 4095) q = 4095;
  return static_cast<uint16_t>(q);
}

bool LaplaceModel::needs_grouping(int channels) {
  size_t full = 1 + varint_len(static_cast<uint32_t>(channels)) +
                (static_cast<size_t>(channels) * 12 + 7) / 8;
  return full > kModelHeaderBudget;
}

LaplaceModel LaplaceModel::fit(const std::vector<int16_t>& values, int channels) {
  if (channels < 1 || channels > kMaxChannels) {
    throw ValidationError("channel count " + std::to_string(channels) + " out of range");
  }
  if (values.empty() || values.size() % static_cast<size_t>(channels) != 0) {
    throw ValidationError("tensor length must be a positive multiple of the channel count");
  }
  size_t per = values.size() / static_cast<size_t>(channels);

  LaplaceModel m;
  m.channels_ = channels;
  m.grouped_ = needs_grouping(channels);
  int slots = m.grouped_ ? (channels + m.group_width() - 1) / m.group_width() : channels;

  m.scale_q8_.resize(static_cast<size_t>(slots), 16);
  for (int slot = 0; slot < slots; ++slot) {
    int c_lo = m.grouped_ ? slot * m.group_width() : slot;
    int c_hi = m.grouped_ ? std::min(channels, c_lo + m.group_width()) : slot + 1;
    uint64_t abs_sum = 0;
    for (int c = c_lo; c < c_hi; ++c) {
      const int16_t* ch = values.data() + static_cast<size_t>(c) * per;
      for (size_t i = 0; i < per; ++i) abs_sum += static_cast<uint64_t>(std::abs(ch[i]));
    }
    double mean = static_cast<double>(abs_sum) / (static_cast<double>(per) * (c_hi - c_lo));
    m.scale_q8_[static_cast<size_t>(slot)] = quantize_scale(mean);
  }
  m.build_tables();
  return m;
}

LaplaceModel LaplaceModel::from_scales(int channels, std::vector<uint16_t> scale_q8) {
  LaplaceModel m;
  m.channels_ = channels;
  m.grouped_ = needs_grouping(channels);
  size_t slots = m.grouped_
                     ? static_cast<size_t>((channels + m.group_width() - 1) / m.group_width())
                     : static_cast<size_t>(channels);
  if (scale_q8.size() != slots) {
    throw ValidationError("expected " + std::to_string(slots) + " scales");
  }
  for (uint16_t s : scale_q8) {
    if (s < 16 || s > 4095) throw ValidationError("scale outside 12-bit wire grid");
  }
  m.scale_q8_ = std::move(scale_q8);
  m.build_tables();
  return m;
}

void LaplaceModel::build_tables() {
  tables_.clear();
  tables_.reserve(scale_q8_.size());
  for (uint16_t s : scale_q8_) tables_.push_back(table_for_scale(s));
}

std::vector<uint8_t> LaplaceModel::serialize() const {
  std::vector<uint8_t> out;
  out.push_back(grouped_ ? 0x01 : 0x00);
  put_varint(out, static_cast<uint32_t>(channels_));
  uint32_t acc = 0;
  int acc_bits = 0;
  for (uint16_t s : scale_q8_) {
    acc = (acc << 12) | (s & 0x0fff);
    acc_bits += 12;
    while (acc_bits >= 8) {
      out.push_back(static_cast<uint8_t>((acc >> (acc_bits - 8)) & 0xff));
      acc_bits -= 8;
    }
  }
  if (acc_bits > 0) out.push_back(static_cast<uint8_t>((acc << (8 - acc_bits)) & 0xff));
  if (out.size() > kModelHeaderBudget) {
    throw ValidationError("model header " + std::to_string(out.size()) + " bytes exceeds budget");
  }
  return out;
}

LaplaceModel LaplaceModel::deserialize(const uint8_t* data, size_t len) {
  if (len == 0 || len > kModelHeaderBudget) throw ParseError("model header: bad length");
  size_t pos = 0;
  uint8_t flags = data[pos++];
  if (flags & ~0x01) throw ParseError("model header: unknown flags");
  bool grouped = flags & 0x01;
  uint32_t channels = get_varint(data, len, pos);
  if (channels < 1 || channels > kMaxChannels) throw ParseError("model header: bad channel count");
  if (grouped != needs_grouping(static_cast<int>(channels))) {
    throw ParseError("model header: grouping flag inconsistent with channel count");
  }

  LaplaceModel m;
  m.channels_ = static_cast<int>(channels);
  m.grouped_ = grouped;
  size_t slots = grouped ? static_cast<size_t>((m.channels_ + m.group_width() - 1) / m.group_width())
                         : channels;
  uint32_t acc = 0;
  int acc_bits = 0;
  for (size_t i = 0; i < slots; ++i) {
    while (acc_bits < 12) {
      if (pos >= len) throw ParseError("model header: truncated scales");
      acc = (acc << 8) | data[pos++];
      acc_bits += 8;
    }
    auto s = static_cast<uint16_t>((acc >> (acc_bits - 12)) & 0x0fff);
    acc_bits -= 12;
    if (s < 16) throw ParseError("model header: scale below floor");
    m.scale_q8_.push_back(s);
  }
  m.build_tables();
  return m;
}

// ---------------------------------------------------------------------------
// Range coder. 32-bit renormalizing coder with byte output and explicit
// carry propagation (LZMA lineage). The first emitted byte is the initial
// zero cache byte; the decoder skips it.

namespace {

class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<uint8_t>& out) : out_(out) {}

  void encode(uint32_t cum, uint32_t freq) {
    uint32_t r = range_ >> 16;
    low_ += static_cast<uint64_t>(cum) * r;
    range_ = freq * r;
    while (range_ < (1u << 24)) {
      shift_low();
      range_ <<= 8;
    }
  }

  void finish() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

 private:
  void shift_low() {
    if (low_ < 0xff000000ULL || low_ > 0xffffffffULL) {
      auto carry = static_cast<uint8_t>(low_ >> 32);
      out_.push_back(static_cast<uint8_t>(cache_ + carry));
      while (--pending_ != 0) out_.push_back(static_cast<uint8_t>(0xff + carry));
      cache_ = static_cast<uint8_t>((low_ >> 24) & 0xff);
    }
    ++pending_;
    low_ = (low_ << 8) & 0xffffffffULL;
  }

  std::vector<uint8_t>& out_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xffffffffu;
  uint8_t cache_ = 0;
  uint64_t pending_ = 1;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t len) : data_(data), len_(len) {
    next_byte();  // initial cache byte, always zero
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  uint32_t decode_target() {
    r_ = range_ >> 16;
    uint32_t v = code_ / r_;
    return v > kProbTotal - 1 ? kProbTotal - 1 : v;
  }

  void consume(uint32_t cum, uint32_t freq) {
    code_ -= cum * r_;
    range_ = freq * r_;
    while (range_ < (1u << 24)) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

  bool overran() const { return overrun_; }

 private:
  uint8_t next_byte() {
    if (pos_ < len_) return data_[pos_++];
    overrun_ = true;
    return 0;
  }

  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xffffffffu;
  uint32_t r_ = 0;
  bool overrun_ = false;
};

const CdfTable& table_for(const LaplaceModel& model, uint8_t channel) {
  return model.table_of_channel(channel);
}

}  // namespace

Bitstream encode_packet(const std::vector<int16_t>& values,
                        const std::vector<uint8_t>& channel_ids, const LaplaceModel& model) {
  if (values.size() != channel_ids.size()) {
    throw ValidationError("encode_packet: values/channel_ids size mismatch");
  }
  Bitstream bs;
  if (values.empty()) return bs;

  RangeEncoder enc(bs.bytes);
  for (size_t k = 0; k < values.size(); ++k) {
    int v = values[k];
    if (v < kSymbolMin || v > kSymbolMax) {
      throw ValidationError("symbol " + std::to_string(v) + " outside coder alphabet at index " +
                            std::to_string(k));
    }
    const CdfTable& t = table_for(model, channel_ids[k]);
    int sym = v - kSymbolMin;
    enc.encode(t.cum[static_cast<size_t>(sym)], t.freq(sym));
  }
  enc.finish();
  return bs;
}

std::vector<int16_t> decode_packet(const Bitstream& bits, const std::vector<uint8_t>& channel_ids,
                                   const LaplaceModel& model) {
  std::vector<int16_t> out;
  if (channel_ids.empty()) {
    if (!bits.bytes.empty()) throw ParseError("decode_packet: bytes present for empty payload");
    return out;
  }
  out.reserve(channel_ids.size());

  RangeDecoder dec(bits.bytes.data(), bits.bytes.size());
  for (size_t k = 0; k < channel_ids.size(); ++k) {
    const CdfTable& t = table_for(model, channel_ids[k]);
    uint32_t target = dec.decode_target();
    // cum is strictly increasing; find the bin containing target.
    auto it = std::upper_bound(t.cum.begin(), t.cum.end(), target);
    int sym = static_cast<int>(it - t.cum.begin()) - 1;
    dec.consume(t.cum[static_cast<size_t>(sym)], t.freq(sym));
    if (dec.overran()) {
      throw ParseError("decode_packet: bitstream truncated at symbol " + std::to_string(k));
    }
    out.push_back(static_cast<int16_t>(sym + kSymbolMin));
  }
  return out;
}

double cross_entropy_bits(const std::vector<int16_t>& values,
                          const std::vector<uint8_t>& channel_ids, const LaplaceModel& model) {
  if (values.size() != channel_ids.size()) {
    throw ValidationError("cross_entropy_bits: size mismatch");
  }
  double bits = 0.0;
  for (size_t k = 0; k < values.size(); ++k) {
    const CdfTable& t = table_for(model, channel_ids[k]);
    int sym = values[k] - kSymbolMin;
    bits += std::log2(static_cast<double>(kProbTotal) / t.freq(sym));
  }
  return bits;
}

uint64_t payload_cost_q8(const std::vector<int16_t>& values,
                         const std::vector<uint8_t>& channel_ids, const LaplaceModel& model) {
  if (values.size() != channel_ids.size()) {
    throw ValidationError("payload_cost_q8: size mismatch");
  }
  uint64_t cost = 0;
  for (size_t k = 0; k < values.size(); ++k) {
    const CdfTable& t = table_for(model, channel_ids[k]);
    cost += t.cost_q8[static_cast<size_t>(values[k] - kSymbolMin)];
  }
  return cost;
}

uint64_t tensor_cost_q8(const std::vector<int16_t>& channel_major_values, int channels,
                        const LaplaceModel& model) {
  if (channels < 1 || channel_major_values.size() % static_cast<size_t>(channels) != 0) {
    throw ValidationError("tensor_cost_q8: length not divisible by channels");
  }
  size_t per = channel_major_values.size() / static_cast<size_t>(channels);
  uint64_t cost = 0;
  for (int c = 0; c < channels; ++c) {
    const CdfTable& t = model.table_of_channel(c);
    const int16_t* v = channel_major_values.data() + static_cast<size_t>(c) * per;
    for (size_t i = 0; i < per; ++i) cost += t.cost_q8[static_cast<size_t>(v[i] - kSymbolMin)];
  }
  return cost;
}

}  // namespace shardcast
