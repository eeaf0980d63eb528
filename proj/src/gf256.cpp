// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <array>
#include <cmath>

#include "shardcast/fec.hpp"

namespace shardcast {

namespace gf256 {

namespace {

struct Tables {
  std::array<uint8_t, 512> exp;
  std::array<int, 256> log;
  Tables() {
    uint16_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[static_cast<size_t>(i)] = static_cast<uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= 0x11d;
    }
    for (int i = 255; i < 512; ++i) exp[static_cast<size_t>(i)] = exp[static_cast<size_t>(i - 255)];
    log[0] = -1;
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

uint8_t mul(uint8_t a, uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const Tables& t = tables();
  return t.exp[static_cast<size_t>(t.log[a] + t.log[b])];
}

uint8_t inv(uint8_t a) {
  if (a == 0) throw ValidationError("gf256: zero has no inverse");
  const Tables& t = tables();
  return t.exp[static_cast<size_t>(255 - t.log[a])];
}

uint8_t exp(int e) {
  e %= 255;
  if (e < 0) e += 255;
  return tables().exp[static_cast<size_t>(e)];
}

}  // namespace gf256

namespace {

// Gauss-Jordan inversion of an n x n matrix over GF(256), row-major.
std::vector<uint8_t> invert_matrix(std::vector<uint8_t> a, int n) {
  std::vector<uint8_t> inv(static_cast<size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1;
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    for (int row = col; row < n; ++row) {
      if (a[static_cast<size_t>(row) * n + col] != 0) {
        pivot = row;
        break;
      }
    }
    if (pivot < 0) throw ValidationError("reed-solomon: singular recovery matrix");
    if (pivot != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a[static_cast<size_t>(pivot) * n + j], a[static_cast<size_t>(col) * n + j]);
        std::swap(inv[static_cast<size_t>(pivot) * n + j], inv[static_cast<size_t>(col) * n + j]);
      }
    }
    uint8_t scale = gf256::inv(a[static_cast<size_t>(col) * n + col]);
    for (int j = 0; j < n; ++j) {
      a[static_cast<size_t>(col) * n + j] = gf256::mul(a[static_cast<size_t>(col) * n + j], scale);
      inv[static_cast<size_t>(col) * n + j] = gf256::mul(inv[static_cast<size_t>(col) * n + j], scale);
    }
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      uint8_t f = a[static_cast<size_t>(row) * n + col];
      if (f == 0) continue;
      for (int j = 0; j < n; ++j) {
        a[static_cast<size_t>(row) * n + j] =
            static_cast<uint8_t>(a[static_cast<size_t>(row) * n + j] ^
                                 gf256::mul(f, a[static_cast<size_t>(col) * n + j]));
        inv[static_cast<size_t>(row) * n + j] =
            static_cast<uint8_t>(inv[static_cast<size_t>(row) * n + j] ^
                                 gf256::mul(f, inv[static_cast<size_t>(col) * n + j]));
      }
    }
  }
  return inv;
}

}  // namespace

ReedSolomon::ReedSolomon(int k, int r) : k_(k), r_(r) {
  if (k < 1 || r < 0 || k + r > 255) {
    throw ValidationError("reed-solomon: need 1 <= k and k + r <= 255");
  }
  // Vandermonde rows at distinct points {0, a^0, a^1, ...}, normalized to a
  // systematic code: G = V * inv(V_top). The top k rows become the identity;
  // rows k..k+r-1 are the parity generator. Any k rows of G stay invertible
  // because any k rows of V do.
  auto point_row = [&](int idx) {
    std::vector<uint8_t> row(static_cast<size_t>(k), 0);
    if (idx == 0) {
      row[0] = 1;
    } else {
      for (int j = 0; j < k; ++j) row[static_cast<size_t>(j)] = j == 0 ? 1 : gf256::exp((idx - 1) * j);
    }
    return row;
  };
  std::vector<uint8_t> vtop(static_cast<size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    auto row = point_row(i);
    std::copy(row.begin(), row.end(), vtop.begin() + static_cast<long>(i) * k);
  }
  auto vtop_inv = invert_matrix(vtop, k);
  parity_rows_.assign(static_cast<size_t>(r) * k, 0);
  for (int p = 0; p < r; ++p) {
    auto vrow = point_row(k + p);
    for (int j = 0; j < k; ++j) {
      uint8_t acc = 0;
      for (int t = 0; t < k; ++t) {
        acc = static_cast<uint8_t>(acc ^ gf256::mul(vrow[static_cast<size_t>(t)],
                                                    vtop_inv[static_cast<size_t>(t) * k + j]));
      }
      parity_rows_[static_cast<size_t>(p) * k + j] = acc;
    }
  }
}

std::vector<std::vector<uint8_t>> ReedSolomon::parity(
    const std::vector<std::vector<uint8_t>>& source) const {
  if (static_cast<int>(source.size()) != k_) throw ValidationError("reed-solomon: need k shards");
  size_t len = source.empty() ? 0 : source[0].size();
  for (const auto& s : source) {
    if (s.size() != len) throw ValidationError("reed-solomon: shard lengths differ");
  }
  std::vector<std::vector<uint8_t>> out(static_cast<size_t>(r_), std::vector<uint8_t>(len, 0));
  for (int p = 0; p < r_; ++p) {
    auto& dst = out[static_cast<size_t>(p)];
    for (int j = 0; j < k_; ++j) {
      uint8_t c = parity_rows_[static_cast<size_t>(p) * k_ + j];
      if (c == 0) continue;
      const auto& src = source[static_cast<size_t>(j)];
      for (size_t b = 0; b < len; ++b) dst[b] = static_cast<uint8_t>(dst[b] ^ gf256::mul(c, src[b]));
    }
  }
  return out;
}

std::vector<std::vector<uint8_t>> ReedSolomon::reconstruct(
    const std::vector<std::optional<std::vector<uint8_t>>>& shards) const {
  if (static_cast<int>(shards.size()) != k_ + r_) {
    throw ValidationError("reed-solomon: expected k + r shard slots");
  }
  std::vector<int> have;
  for (int i = 0; i < k_ + r_ && static_cast<int>(have.size()) < k_; ++i) {
    if (shards[static_cast<size_t>(i)].has_value()) have.push_back(i);
  }
  if (static_cast<int>(have.size()) < k_) {
    throw ValidationError("reed-solomon: fewer than k shards received");
  }

  bool all_source = true;
  for (int i = 0; i < k_; ++i) all_source &= shards[static_cast<size_t>(i)].has_value();
  if (all_source) {
    std::vector<std::vector<uint8_t>> out;
    for (int i = 0; i < k_; ++i) out.push_back(*shards[static_cast<size_t>(i)]);
    return out;
  }

  size_t len = shards[static_cast<size_t>(have[0])]->size();
  // Rows of the generator matrix for the shards we hold.
  std::vector<uint8_t> a(static_cast<size_t>(k_) * k_, 0);
  for (int row = 0; row < k_; ++row) {
    int idx = have[static_cast<size_t>(row)];
    if (shards[static_cast<size_t>(idx)]->size() != len) {
      throw ValidationError("reed-solomon: shard lengths differ");
    }
    if (idx < k_) {
      a[static_cast<size_t>(row) * k_ + idx] = 1;
    } else {
      for (int j = 0; j < k_; ++j) {
        a[static_cast<size_t>(row) * k_ + j] = parity_rows_[static_cast<size_t>(idx - k_) * k_ + j];
      }
    }
  }
  auto ainv = invert_matrix(std::move(a), k_);

  std::vector<std::vector<uint8_t>> out(static_cast<size_t>(k_), std::vector<uint8_t>(len, 0));
  for (int i = 0; i < k_; ++i) {
    auto& dst = out[static_cast<size_t>(i)];
    for (int row = 0; row < k_; ++row) {
      uint8_t c = ainv[static_cast<size_t>(i) * k_ + row];
      if (c == 0) continue;
      const auto& src = *shards[static_cast<size_t>(have[static_cast<size_t>(row)])];
      for (size_t b = 0; b < len; ++b) dst[b] = static_cast<uint8_t>(dst[b] ^ gf256::mul(c, src[b]));
    }
  }
  return out;
}

void FecRateController::observe(int64_t now_us, double loss_fraction) {
  history_.emplace_back(now_us, loss_fraction);
}

double FecRateController::redundancy(int64_t now_us) const {
  // lazily forget everything outside the trailing window
  auto keep_from = std::find_if(history_.begin(), history_.end(), [&](const auto& h) {
    return h.first >= now_us - window_us_;
  });
  history_.erase(history_.begin(), keep_from);
  double worst = 0.0;
  for (const auto& [t, loss] : history_) worst = std::max(worst, loss);
  return std::clamp(worst, floor_, cap_);
}

int FecRateController::parity_for(int k, double redundancy) {
  // R is parity / (k + r)  =>  r = ceil(k * R / (1 - R))
  double r = static_cast<double>(k) * redundancy / (1.0 - redundancy);
  return std::max(1, static_cast<int>(std::ceil(r - 1e-9)));
}

}  // namespace shardcast
