// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>

#include "shardcast/losslab.hpp"

namespace shardcast {

double sample_rate(const MaskDistribution& dist, Rng& rng) {
  if (rng.next_unit() < dist.zero_prob) return 0.0;
  return dist.rate_set[rng.next_below(dist.rate_set.size())];
}

std::vector<uint8_t> draw_mask(size_t m, double rate, Rng& rng) {
  if (rate < 0.0 || rate > 1.0) throw ValidationError("mask rate must be in [0, 1]");
  auto zeros = static_cast<size_t>(std::lround(rate * static_cast<double>(m)));
  std::vector<uint8_t> mask(m, 1);
  // Partial Fisher-Yates over the index space picks the zero positions.
  std::vector<uint32_t> idx(m);
  for (size_t i = 0; i < m; ++i) idx[i] = static_cast<uint32_t>(i);
  for (size_t i = 0; i < zeros; ++i) {
    size_t j = i + rng.next_below(m - i);
    std::swap(idx[i], idx[j]);
    mask[idx[i]] = 0;
  }
  return mask;
}

void ToyLinearCodec::validate() const {
  if (encode.rows() != decode.cols() || encode.cols() != decode.rows()) {
    throw ValidationError("toy codec: encode is k x d, decode must be d x k");
  }
}

ToyLinearCodec ToyLinearCodec::random(int k, int d, Rng& rng) {
  ToyLinearCodec toy;
  toy.encode.resize(k, d);
  toy.decode.resize(d, k);
  auto gauss = [&rng]() {
    // Box-Muller from the deterministic stream
    double u1 = rng.next_unit();
    double u2 = rng.next_unit();
    u1 = std::max(u1, 1e-12);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < d; ++j) toy.encode(i, j) = gauss() / std::sqrt(static_cast<double>(d));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < k; ++j) toy.decode(i, j) = gauss() / std::sqrt(static_cast<double>(k));
  }
  return toy;
}

double masked_loss(const ToyLinearCodec& toy, const Eigen::VectorXd& x,
                   const std::vector<uint8_t>& mask) {
  toy.validate();
  if (static_cast<int>(mask.size()) != toy.k()) throw ValidationError("mask length != k");
  Eigen::VectorXd e = toy.encode * x;
  for (int i = 0; i < toy.k(); ++i) {
    if (!mask[static_cast<size_t>(i)]) e(i) = 0.0;
  }
  return (toy.decode * e - x).squaredNorm();
}

namespace {

// Loss for a keep-set given as a bitmask over k elements.
double loss_for_bits(const ToyLinearCodec& toy, const Eigen::VectorXd& x, uint32_t keep_bits) {
  Eigen::VectorXd e = toy.encode * x;
  for (int i = 0; i < toy.k(); ++i) {
    if (!(keep_bits >> i & 1u)) e(i) = 0.0;
  }
  return (toy.decode * e - x).squaredNorm();
}

Eigen::MatrixXd grad_for_bits(const ToyLinearCodec& toy, const Eigen::VectorXd& x,
                              uint32_t keep_bits) {
  Eigen::VectorXd e = toy.encode * x;
  for (int i = 0; i < toy.k(); ++i) {
    if (!(keep_bits >> i & 1u)) e(i) = 0.0;
  }
  Eigen::VectorXd residual = toy.decode * e - x;
  Eigen::VectorXd g = 2.0 * toy.decode.transpose() * residual;
  for (int i = 0; i < toy.k(); ++i) {
    if (!(keep_bits >> i & 1u)) g(i) = 0.0;  // masked elements pass no gradient
  }
  return g * x.transpose();
}

// Visits every k-bit word with exactly `zeros` bits cleared.
template <typename Fn>
void for_each_mask(int k, int zeros, Fn&& fn) {
  uint32_t full = (k == 32) ? 0xffffffffu : ((1u << k) - 1u);
  if (zeros == 0) {
    fn(full);
    return;
  }
  // Gosper's hack over the zero positions.
  uint32_t z = (1u << zeros) - 1u;
  while (z <= full) {
    if ((z | full) == full) fn(full ^ z);
    uint32_t c = z & (0u - z);
    uint32_t r = z + c;
    uint32_t next = (((r ^ z) >> 2) / c) | r;
    if (r == 0) break;
    z = next;
  }
}

}  // namespace

double exact_expected_loss(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate,
                           ExpectationMode mode) {
  toy.validate();
  const int k = toy.k();
  if (mode == ExpectationMode::kEnumerate) {
    if (k > 12) {
      throw ValidationError("enumeration supports k <= 12; use ExpectationMode::kBernoulli");
    }
    int zeros = static_cast<int>(std::lround(rate * k));
    double sum = 0.0;
    size_t count = 0;
    for_each_mask(k, zeros, [&](uint32_t keep) {
      sum += loss_for_bits(toy, x, keep);
      ++count;
    });
    return sum / static_cast<double>(count);
  }

  // i.i.d. Bernoulli survival with keep probability q = 1 - rate:
  // E||D(M.*e) - x||^2 = q^2 ||De||^2 + q(1-q) sum_i e_i^2 ||d_i||^2
  //                      - 2 q x^T De + ||x||^2
  const double q = 1.0 - rate;
  Eigen::VectorXd e = toy.encode * x;
  Eigen::VectorXd de = toy.decode * e;
  double col_term = 0.0;
  for (int i = 0; i < k; ++i) col_term += e(i) * e(i) * toy.decode.col(i).squaredNorm();
  return q * q * de.squaredNorm() + q * (1.0 - q) * col_term - 2.0 * q * x.dot(de) +
         x.squaredNorm();
}

Eigen::MatrixXd exact_gradient(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate) {
  toy.validate();
  const int k = toy.k();
  if (k > 12) throw ValidationError("exact_gradient enumerates masks; k <= 12");
  int zeros = static_cast<int>(std::lround(rate * k));
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(toy.k(), toy.dim());
  size_t count = 0;
  for_each_mask(k, zeros, [&](uint32_t keep) {
    sum += grad_for_bits(toy, x, keep);
    ++count;
  });
  return sum / static_cast<double>(count);
}

Eigen::MatrixXd grad_estimate(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate,
                              int n_samples, Rng& rng) {
  toy.validate();
  if (n_samples < 1) throw ValidationError("grad_estimate needs n_samples >= 1");
  const int k = toy.k();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(toy.k(), toy.dim());
  for (int s = 0; s < n_samples; ++s) {
    auto mask = draw_mask(static_cast<size_t>(k), rate, rng);
    uint32_t keep = 0;
    for (int i = 0; i < k; ++i) keep |= static_cast<uint32_t>(mask[static_cast<size_t>(i)]) << i;
    sum += grad_for_bits(toy, x, keep);
  }
  return sum / static_cast<double>(n_samples);
}

Eigen::MatrixXd finite_difference_gradient(const ToyLinearCodec& toy, const Eigen::VectorXd& x,
                                           double rate, double h, ExpectationMode mode) {
  Eigen::MatrixXd g(toy.k(), toy.dim());
  ToyLinearCodec probe = toy;
  for (int i = 0; i < toy.k(); ++i) {
    for (int j = 0; j < toy.dim(); ++j) {
      probe.encode(i, j) = toy.encode(i, j) + h;
      double up = exact_expected_loss(probe, x, rate, mode);
      probe.encode(i, j) = toy.encode(i, j) - h;
      double down = exact_expected_loss(probe, x, rate, mode);
      probe.encode(i, j) = toy.encode(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

GradCheckReport run_grad_check(uint64_t seed) {
  Rng root(seed);
  Rng toy_rng = root.child(1);
  const int k = 8, d = 6;
  const double rate = 0.25;
  ToyLinearCodec toy = ToyLinearCodec::random(k, d, toy_rng);
  Eigen::VectorXd x(d);
  Rng x_rng = root.child(2);
  for (int j = 0; j < d; ++j) x(j) = 2.0 * x_rng.next_unit() - 1.0;

  Eigen::MatrixXd fd = finite_difference_gradient(toy, x, rate);
  double fd_norm = fd.norm();

  GradCheckReport report;
  report.sample_sizes = {100, 1000, 10000, 100000};
  const int reps = 12;
  for (size_t gi = 0; gi < report.sample_sizes.size(); ++gi) {
    int n = report.sample_sizes[gi];
    double err_sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rng = root.child(100 + gi, static_cast<uint64_t>(rep));
      Eigen::MatrixXd est = grad_estimate(toy, x, rate, n, rng);
      double rel = (est - fd).norm() / fd_norm;
      err_sq += rel * rel;
    }
    report.errors.push_back(std::sqrt(err_sq / reps));
  }
  report.relative_error = report.errors.back();

  // least-squares slope of log10(error) vs log10(N)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  auto pts = static_cast<double>(report.sample_sizes.size());
  for (size_t i = 0; i < report.sample_sizes.size(); ++i) {
    double lx = std::log10(static_cast<double>(report.sample_sizes[i]));
    double ly = std::log10(report.errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  report.slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
  report.pass = report.relative_error <= 0.05 && std::abs(report.slope + 0.5) <= 0.1;
  return report;
}

}  // namespace shardcast
