// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "shardcast/util.hpp"

namespace shardcast {

// Training-time loss-rate distribution: zero with probability 0.8, otherwise
// uniform over {10%, ..., 60%}.
struct MaskDistribution {
  double zero_prob = 0.8;
  std::vector<double> rate_set = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
};

double sample_rate(const MaskDistribution& dist, Rng& rng);

// Binary keep-mask over m elements with exactly round(rate*m) zeros at
// uniformly chosen positions (without replacement).
std::vector<uint8_t> draw_mask(size_t m, double rate, Rng& rng);

// Tiny linear autoencoder: encode is k x d, decode is d x k, loss is
// ||decode(mask .* encode(x)) - x||^2. Small enough that the masked-loss
// expectation can be enumerated exactly.
struct ToyLinearCodec {
  Eigen::MatrixXd encode;  // k x d
  Eigen::MatrixXd decode;  // d x k

  int k() const { return static_cast<int>(encode.rows()); }
  int dim() const { return static_cast<int>(encode.cols()); }
  void validate() const;

  static ToyLinearCodec random(int k, int d, Rng& rng);
};

double masked_loss(const ToyLinearCodec& toy, const Eigen::VectorXd& x,
                   const std::vector<uint8_t>& mask);

enum class ExpectationMode {
  kEnumerate,  // exact over all masks with round(rate*k) zeros; k <= 12
  kBernoulli,  // closed form for i.i.d. element survival
};

// Exact expected masked loss under the chosen mask law.
double exact_expected_loss(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate,
                           ExpectationMode mode = ExpectationMode::kEnumerate);

// Exact gradient d/d(encode) of the enumerate-mode expectation, by averaging
// the per-mask analytic gradient. Test oracle for the estimator below.
Eigen::MatrixXd exact_gradient(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate);

// Monte-Carlo pass-through gradient estimate: per sampled mask, backpropagate
// 2(decode(m .* e) - x) through the decoder, zero the components of masked
// elements, then through the encoder. Unbiased because the mask law does not
// depend on the encoder weights.
Eigen::MatrixXd grad_estimate(const ToyLinearCodec& toy, const Eigen::VectorXd& x, double rate,
                              int n_samples, Rng& rng);

// Central finite differences of exact_expected_loss, entry by entry.
Eigen::MatrixXd finite_difference_gradient(const ToyLinearCodec& toy, const Eigen::VectorXd& x,
                                           double rate, double h = 1e-5,
                                           ExpectationMode mode = ExpectationMode::kEnumerate);

// Report emitted by the grad-check command; every field is also asserted by
// the acceptance suite.
struct GradCheckReport {
  double relative_error = 0.0;    // estimator vs finite differences, N = 1e5
  double slope = 0.0;             // log-log error decay over N
  std::vector<int> sample_sizes;  // N grid used for the slope
  std::vector<double> errors;     // mean relative error per N
  bool pass = false;
};

GradCheckReport run_grad_check(uint64_t seed);

}  // namespace shardcast
