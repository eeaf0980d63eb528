// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

// GF(2^8) with the 0x11d polynomial.
namespace gf256 {
uint8_t mul(uint8_t a, uint8_t b);
uint8_t inv(uint8_t a);
uint8_t exp(int e);
}  // namespace gf256

// Systematic Reed-Solomon erasure code over GF(256): k source shards plus r
// parity shards; any k of the k+r recover the source exactly (MDS).
class ReedSolomon {
 public:
  ReedSolomon(int k, int r);

  int source_count() const { return k_; }
  int parity_count() const { return r_; }

  // Parity shards for k equal-length source shards.
  std::vector<std::vector<uint8_t>> parity(const std::vector<std::vector<uint8_t>>& source) const;

  // Recovers the k source shards from any k received shards of the k+r.
  // shards.size() == k+r with std::nullopt marking losses. Throws
  // ValidationError when fewer than k are present.
  std::vector<std::vector<uint8_t>> reconstruct(
      const std::vector<std::optional<std::vector<uint8_t>>>& shards) const;

 private:
  int k_;
  int r_;
  std::vector<uint8_t> parity_rows_;  // r x k generator tail, row-major
};

// Redundancy controller: R is the parity fraction of the total packet count,
// matching how loss rates are measured. Tracks the worst per-frame loss in a
// trailing 2 s window, clamped to [floor, cap].
class FecRateController {
 public:
  FecRateController(double floor = 0.1, double cap = 0.5, int64_t window_us = 2000000)
      : floor_(floor), cap_(cap), window_us_(window_us) {}

  void observe(int64_t now_us, double loss_fraction);
  double redundancy(int64_t now_us) const;

  // Parity count for k source packets at redundancy R (parity / total).
  static int parity_for(int k, double redundancy);

 private:
  double floor_;
  double cap_;
  int64_t window_us_;
  mutable std::vector<std::pair<int64_t, double>> history_;
};

}  // namespace shardcast
