// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

enum class PacketizeStrategy : uint8_t { kRandom = 0, kBlock = 1, kInterleaved = 2 };

// Reversible element <-> packet assignment over m tensor elements and n
// packets. The random strategy maps element i to packet (i*p mod n) at
// in-packet slot floor(i*p / n); because p is coprime with n the per-packet
// counts differ by at most one and losing a packet erases a pseudo-random
// subset of element positions. Block and interleaved are comparators for
// experiments, obeying the same round-trip laws.
class PacketizationMap {
 public:
  // Validates m >= n >= 2; for the random strategy p must be prime and
  // coprime with both n and m.
  PacketizationMap(uint32_t m, uint16_t n, uint16_t p,
                   PacketizeStrategy strategy = PacketizeStrategy::kRandom);

  // Picks p as the smallest prime > max(n, 16) that does not divide m, so
  // streams carry a self-describing multiplier in the packet header.
  static PacketizationMap with_auto_multiplier(uint32_t m, uint16_t n,
                                               PacketizeStrategy strategy = PacketizeStrategy::kRandom);

  uint32_t element_count() const { return m_; }
  uint16_t packet_count() const { return n_; }
  uint16_t multiplier() const { return p_; }
  PacketizeStrategy strategy() const { return strategy_; }

  // Packet index for element i.
  uint16_t packet_of(uint32_t i) const;

  // (packet, slot) of element i. Slots within a packet are sparse for the
  // random strategy; only their order matters on the wire.
  std::pair<uint16_t, uint32_t> assign(uint32_t i) const;

  // Number of elements mapped to packet j.
  uint32_t packet_size(uint16_t j) const;

  // Element indices mapped to packet j, in increasing slot order. This is the
  // wire order of the packet's payload.
  std::vector<uint32_t> packet_elements(uint16_t j) const;

  // Scatters a flat tensor (channel-major, length m) into n per-packet
  // element lists, each in wire order.
  std::vector<std::vector<int16_t>> split(const std::vector<int16_t>& values) const;

  // Inverse of split. Packets that were lost are std::nullopt; their
  // elements are restored as zero. Returns the tensor and the fraction of
  // elements zeroed. At least one packet must be present.
  struct MergeResult {
    std::vector<int16_t> values;
    double lost_fraction = 0.0;
  };
  MergeResult merge(const std::vector<std::optional<std::vector<int16_t>>>& packets) const;

 private:
  uint32_t m_;
  uint16_t n_;
  uint16_t p_;
  PacketizeStrategy strategy_;
};

bool is_prime_u32(uint32_t v);

}  // namespace shardcast
