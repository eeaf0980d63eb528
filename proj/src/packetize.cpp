// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <numeric>

#include "shardcast/packetize.hpp"

namespace shardcast {

bool is_prime_u32(uint32_t v) {
  if (v < 2) return false;
  if (v % 2 == 0) return v == 2;
  for (uint32_t d = 3; d * d <= v; d += 2) {
    if (v % d == 0) return false;
  }
  return true;
}

PacketizationMap::PacketizationMap(uint32_t m, uint16_t n, uint16_t p, PacketizeStrategy strategy)
    : m_(m), n_(n), p_(p), strategy_(strategy) {
  if (n < 2) throw ValidationError("packetization needs at least 2 packets");
  if (m < n) throw ValidationError("packetization needs m >= n, got m=" + std::to_string(m) +
                                   " n=" + std::to_string(n));
  if (strategy == PacketizeStrategy::kRandom) {
    if (!is_prime_u32(p)) {
      throw ValidationError("multiplier p=" + std::to_string(p) + " must be prime");
    }
    if (n % p == 0 || m % p == 0) {
      throw ValidationError("multiplier p=" + std::to_string(p) +
                            " must be coprime with n and m");
    }
  }
}

PacketizationMap PacketizationMap::with_auto_multiplier(uint32_t m, uint16_t n,
                                                        PacketizeStrategy strategy) {
  uint32_t p = std::max<uint32_t>(n, 16) + 1;
  while (!is_prime_u32(p) || m % p == 0) ++p;
  if (p > 0xffff) throw ValidationError("no 16-bit multiplier for m=" + std::to_string(m));
  return PacketizationMap(m, n, static_cast<uint16_t>(p), strategy);
}

uint16_t PacketizationMap::packet_of(uint32_t i) const {
  if (i >= m_) throw ValidationError("element index " + std::to_string(i) + " out of range");
  switch (strategy_) {
    case PacketizeStrategy::kRandom:
      return static_cast<uint16_t>((static_cast<uint64_t>(i) * p_) % n_);
    case PacketizeStrategy::kBlock:
      return static_cast<uint16_t>((static_cast<uint64_t>(i) * n_) / m_);
    case PacketizeStrategy::kInterleaved:
      return static_cast<uint16_t>(i % n_);
  }
  return 0;
}

std::pair<uint16_t, uint32_t> PacketizationMap::assign(uint32_t i) const {
  uint16_t j = packet_of(i);
  uint32_t slot;
  switch (strategy_) {
    case PacketizeStrategy::kRandom:
      slot = static_cast<uint32_t>((static_cast<uint64_t>(i) * p_ - j) / n_);
      break;
    case PacketizeStrategy::kBlock:
      slot = i - static_cast<uint32_t>((static_cast<uint64_t>(j) * m_ + n_ - 1) / n_);
      break;
    case PacketizeStrategy::kInterleaved:
      slot = i / n_;
      break;
  }
  return {j, slot};
}

uint32_t PacketizationMap::packet_size(uint16_t j) const {
  if (j >= n_) throw ValidationError("packet index out of range");
  switch (strategy_) {
    case PacketizeStrategy::kRandom: {
      // Elements in packet j are i = i0 + t*n with i0 = p^{-1} j mod n.
      uint32_t i0 = 0;
      while ((static_cast<uint64_t>(i0) * p_) % n_ != j) ++i0;
      return (m_ - i0 + n_ - 1) / n_;
    }
    case PacketizeStrategy::kBlock: {
      auto lo = static_cast<uint32_t>((static_cast<uint64_t>(j) * m_ + n_ - 1) / n_);
      auto hi = static_cast<uint32_t>((static_cast<uint64_t>(j + 1) * m_ + n_ - 1) / n_);
      return hi - lo;
    }
    case PacketizeStrategy::kInterleaved:
      return (m_ - j + n_ - 1) / n_;
  }
  return 0;
}

std::vector<uint32_t> PacketizationMap::packet_elements(uint16_t j) const {
  if (j >= n_) throw ValidationError("packet index out of range");
  std::vector<uint32_t> out;
  out.reserve(packet_size(j));
  switch (strategy_) {
    case PacketizeStrategy::kRandom: {
      uint32_t i0 = 0;
      while ((static_cast<uint64_t>(i0) * p_) % n_ != j) ++i0;
      // Increasing i is increasing slot: slot grows by p per step of n.
      for (uint32_t i = i0; i < m_; i += n_) out.push_back(i);
      break;
    }
    case PacketizeStrategy::kBlock: {
      auto lo = static_cast<uint32_t>((static_cast<uint64_t>(j) * m_ + n_ - 1) / n_);
      auto hi = static_cast<uint32_t>((static_cast<uint64_t>(j + 1) * m_ + n_ - 1) / n_);
      for (uint32_t i = lo; i < hi; ++i) out.push_back(i);
      break;
    }
    case PacketizeStrategy::kInterleaved:
      for (uint32_t i = j; i < m_; i += n_) out.push_back(i);
      break;
  }
  return out;
}

std::vector<std::vector<int16_t>> PacketizationMap::split(const std::vector<int16_t>& values) const {
  if (values.size() != m_) {
    throw ValidationError("split: tensor length " + std::to_string(values.size()) +
                          " != map element count " + std::to_string(m_));
  }
  std::vector<std::vector<int16_t>> out(n_);
  for (uint16_t j = 0; j < n_; ++j) {
    auto idx = packet_elements(j);
    auto& pkt = out[j];
    pkt.reserve(idx.size());
    for (uint32_t i : idx) pkt.push_back(values[i]);
  }
  return out;
}

PacketizationMap::MergeResult PacketizationMap::merge(
    const std::vector<std::optional<std::vector<int16_t>>>& packets) const {
  if (packets.size() != n_) {
    throw ValidationError("merge: expected " + std::to_string(n_) + " packet slots");
  }
  size_t present = 0;
  for (const auto& p : packets) present += p.has_value();
  if (present == 0) throw ValidationError("merge: no packets present");

  MergeResult r;
  r.values.assign(m_, 0);
  uint64_t lost = 0;
  for (uint16_t j = 0; j < n_; ++j) {
    auto idx = packet_elements(j);
    if (!packets[j].has_value()) {
      lost += idx.size();
      continue;
    }
    const auto& pkt = *packets[j];
    if (pkt.size() != idx.size()) {
      throw ValidationError("merge: packet " + std::to_string(j) + " has " +
                            std::to_string(pkt.size()) + " elements, expected " +
                            std::to_string(idx.size()));
    }
    for (size_t k = 0; k < idx.size(); ++k) r.values[idx[k]] = pkt[k];
  }
  r.lost_fraction = static_cast<double>(lost) / static_cast<double>(m_);
  return r;
}

}  // namespace shardcast
