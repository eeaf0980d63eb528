// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "shardcast/codec.hpp"
#include "shardcast/entropy.hpp"

using namespace shardcast;

namespace {

// Independent PSNR oracle: plain double-precision MSE over luma.
double psnr_oracle(const Frame& a, const Frame& b) {
  REQUIRE(a.same_dims(b));
  double sum = 0;
  for (size_t i = 0; i < a.y.size(); ++i) {
    double d = static_cast<double>(a.y[i]) - b.y[i];
    sum += d * d;
  }
  if (sum == 0) return 99.0;
  double mse = sum / static_cast<double>(a.y.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Frame textured(int w, int h, uint64_t seed, uint32_t index = 0, int vx = 0) {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = w;
  spec.height = h;
  spec.seed = seed;
  spec.vx = vx;
  return synth_frame(spec, index);
}

// Entropy-coded size of a tensor as one stream (size comparisons only).
size_t coded_size(const CodedTensor& t) {
  auto model = LaplaceModel::fit(t.values, t.channels);
  std::vector<uint8_t> chans(t.values.size());
  for (size_t i = 0; i < chans.size(); ++i) {
    chans[i] = t.channel_of(static_cast<uint32_t>(i));
  }
  return encode_packet(t.values, chans, model).bytes.size() + model.serialize().size();
}

std::vector<int16_t> masked(const std::vector<int16_t>& values, double rate, Rng& rng) {
  std::vector<int16_t> out = values;
  auto zeros = static_cast<size_t>(std::lround(rate * static_cast<double>(values.size())));
  std::vector<uint32_t> idx(values.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<uint32_t>(i);
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  for (size_t k = 0; k < zeros; ++k) out[idx[k]] = 0;
  return out;
}

}  // namespace

TEST_CASE("quality ladder is strictly decreasing in step and 11 rungs") {
  for (int r = 0; r + 1 < kNumRungs; ++r) {
    CHECK(QualityLevel::rung(r).residual_step_q8 > QualityLevel::rung(r + 1).residual_step_q8);
  }
  CHECK_THROWS_AS(QualityLevel::rung(11), ValidationError);
  CHECK_THROWS_AS(QualityLevel::rung(-1), ValidationError);
}

TEST_CASE("encode_i of a flat 128 frame is all zeros") {
  Frame f = Frame::make(32, 32, true);
  std::fill(f.y.begin(), f.y.end(), 128);
  auto enc = encode_i(f, QualityLevel::rung(10));
  for (auto v : enc.frame.residual.values) CHECK(v == 0);
  auto dec = decode_frame_full(enc.frame, nullptr);
  CHECK(dec.y == f.y);
}

TEST_CASE("encode_i DC of a constant 255 frame at step 16 is 64 per block") {
  Frame f = Frame::make(32, 32, true);
  std::fill(f.y.begin(), f.y.end(), 255);
  // rung 4 has residual step 16.0
  auto q = QualityLevel::rung(4);
  REQUIRE(q.intra_step_q8 == 16 * 256);
  auto enc = encode_i(f, q);
  const auto& t = enc.frame.residual;
  size_t nb = t.per_channel();
  CHECK(nb == 16);  // 4x4 blocks of 8x8
  for (size_t b = 0; b < nb; ++b) {
    CHECK(t.values[b] == 64);  // DC channel: round(8*(255-128)/16) = round(63.5)
  }
  for (size_t i = nb; i < t.values.size(); ++i) CHECK(t.values[i] == 0);
}

TEST_CASE("intra round trip at the finest rung clears 40 dB on textured noise") {
  Frame f = textured(64, 64, 5);
  auto enc = encode_i(f, QualityLevel::rung(10));
  auto dec = decode_frame_full(enc.frame, nullptr);
  CHECK(psnr_oracle(f, dec) >= 40.0);
}

TEST_CASE("encode_p of an identical frame gives zero MVs and zero residual") {
  Frame f = textured(64, 48, 9);
  Frame ref = f;
  ref.index = 0;
  f.index = 1;
  auto enc = encode_p(f, ref, QualityLevel::rung(8));
  for (auto v : enc.frame.mv.values) CHECK(v == 0);
  for (auto v : enc.frame.residual.values) CHECK(v == 0);
  auto dec = decode_frame_full(enc.frame, &ref);
  CHECK(dec.y == f.y);
}

TEST_CASE("motion search matches a brute-force SAD oracle") {
  Frame ref = textured(64, 48, 21);
  Frame cur = textured(64, 48, 21, 3, 2);  // shifted by (6, 0) at index 3? no: vx=2 -> 6 px
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(8));

  int mb_cols = 64 / 16;
  int mb_rows = 48 / 16;
  auto sample = [&](const Frame& f, int x, int y) {
    x = std::clamp(x, 0, f.width - 1);
    y = std::clamp(y, 0, f.height - 1);
    return static_cast<int>(f.y[static_cast<size_t>(y) * f.width + x]);
  };
  for (int my = 0; my < mb_rows; ++my) {
    for (int mx = 0; mx < mb_cols; ++mx) {
      // oracle: exhaustive SAD with the documented tie-break
      long best_sad = -1;
      int bdx = 0, bdy = 0;
      for (int dy = -8; dy <= 8; ++dy) {
        for (int dx = -8; dx <= 8; ++dx) {
          long sad = 0;
          for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
              sad += std::abs(sample(cur, mx * 16 + x, my * 16 + y) -
                              sample(ref, mx * 16 + x + dx, my * 16 + y + dy));
            }
          }
          bool better;
          if (best_sad < 0 || sad < best_sad) {
            better = true;
          } else if (sad > best_sad) {
            better = false;
          } else {
            int d = std::abs(dx) + std::abs(dy);
            int bd = std::abs(bdx) + std::abs(bdy);
            better = d < bd || (d == bd && (dy < bdy || (dy == bdy && dx < bdx)));
          }
          if (better) {
            best_sad = sad;
            bdx = dx;
            bdy = dy;
          }
        }
      }
      size_t i = static_cast<size_t>(my) * mb_cols + mx;
      CHECK(enc.frame.mv.values[i] == bdx);
      CHECK(enc.frame.mv.values[mb_cols * mb_rows + i] == bdy);
    }
  }
}

TEST_CASE("wraparound gradient shift gives interior MVs of (-2, 0)") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kMovingGradient;
  spec.width = 96;
  spec.height = 64;
  spec.vx = 2;
  Frame ref = synth_frame(spec, 0);
  Frame cur = synth_frame(spec, 1);
  auto enc = encode_p(cur, ref, QualityLevel::rung(8));
  int mb_cols = 96 / 16, mb_rows = 64 / 16;
  // interior macroblocks: away from the wrap seam and frame borders
  for (int my = 1; my + 1 < mb_rows; ++my) {
    for (int mx = 1; mx + 1 < mb_cols; ++mx) {
      size_t i = static_cast<size_t>(my) * mb_cols + mx;
      CHECK(enc.frame.mv.values[i] == -2);
      CHECK(enc.frame.mv.values[static_cast<size_t>(mb_cols) * mb_rows + i] == 0);
    }
  }
}

TEST_CASE("rung 10 codes strictly larger and reconstructs strictly better than rung 0") {
  Frame ref = textured(64, 64, 31);
  Frame cur = textured(64, 64, 31, 1, 1);
  cur.index = 1;
  auto coarse = encode_p(cur, ref, QualityLevel::rung(0));
  auto fine = encode_p(cur, ref, QualityLevel::rung(10));
  CHECK(coded_size(fine.frame.residual) > coded_size(coarse.frame.residual));
  double p0 = psnr_oracle(cur, decode_frame_full(coarse.frame, &ref));
  double p10 = psnr_oracle(cur, decode_frame_full(fine.frame, &ref));
  CHECK(p10 > p0);
}

TEST_CASE("decode with no masking equals lossless decode") {
  Frame ref = textured(48, 48, 77);
  Frame cur = textured(48, 48, 77, 2, 1);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(7));
  auto a = decode_frame_full(enc.frame, &ref);
  auto b = decode_frame(enc.frame, &ref, enc.frame.mv.values, enc.frame.residual.values, true);
  CHECK(a == b);
}

TEST_CASE("fully masked residual with zero motion reproduces the reference") {
  Frame ref = textured(48, 48, 12);
  Frame cur = ref;
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(6));
  std::vector<int16_t> zero_res(enc.frame.residual.values.size(), 0);
  auto dec = decode_frame(enc.frame, &ref, enc.frame.mv.values, zero_res, true);
  CHECK(dec.y == ref.y);
}

TEST_CASE("50% masking lands strictly between full-mask and no-mask quality") {
  Frame f = textured(64, 64, 3);
  auto enc = encode_i(f, QualityLevel::rung(9));
  auto lossless = decode_frame_full(enc.frame, nullptr);
  double p_full = psnr_oracle(f, lossless);
  std::vector<int16_t> all_zero(enc.frame.residual.values.size(), 0);
  double p_none = psnr_oracle(f, decode_frame(enc.frame, nullptr, {}, all_zero, true));

  Rng rng(404);
  for (int seed = 0; seed < 20; ++seed) {
    auto half = masked(enc.frame.residual.values, 0.5, rng);
    double p = psnr_oracle(f, decode_frame(enc.frame, nullptr, {}, half, true));
    CHECK(p > p_none);
    CHECK(p < p_full);
  }
}

TEST_CASE("mean PSNR degrades monotonically in mask rate (20 seeds)") {
  Frame ref = textured(64, 64, 17);
  Frame cur = textured(64, 64, 17, 1, 0);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(8));
  Rng root(5150);
  double prev = 1e9;
  for (double rate : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
    double mean = 0;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng = root.child(static_cast<uint64_t>(rate * 100), static_cast<uint64_t>(seed));
      auto mv = masked(enc.frame.mv.values, rate, rng);
      auto res = masked(enc.frame.residual.values, rate, rng);
      mean += psnr_oracle(cur, decode_frame(enc.frame, &ref, mv, res, true));
    }
    mean /= 20.0;
    CHECK(mean <= prev + 0.05);  // tiny slack for Monte-Carlo noise
    prev = mean;
  }
}

TEST_CASE("requantize at the original rung is bit-identical") {
  Frame ref = textured(48, 48, 8);
  Frame cur = textured(48, 48, 8, 1, 1);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(5));
  auto re = requantize_residual(enc.frame, enc.raw_residual_q8, QualityLevel::rung(5));
  CHECK(re.mv == enc.frame.mv);
  CHECK(re.residual == enc.frame.residual);
}

TEST_CASE("requantize ladder sweep: sizes non-increasing as steps grow") {
  Frame ref = textured(64, 64, 23);
  Frame cur = textured(64, 64, 23, 2, 0);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(10));
  size_t prev = 0;
  for (int r = 0; r < kNumRungs; ++r) {
    auto re = requantize_residual(enc.frame, enc.raw_residual_q8, QualityLevel::rung(r));
    CHECK(re.mv == enc.frame.mv);  // MV tensor untouched
    size_t sz = coded_size(re.residual);
    if (r > 0) CHECK(sz >= prev);
    prev = sz;
  }
}

TEST_CASE("lossless PSNR is monotone along the ladder") {
  Frame ref = textured(64, 64, 29);
  Frame cur = textured(64, 64, 29, 1, 1);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(10));
  double prev = 0;
  for (int r = 0; r < kNumRungs; ++r) {
    auto re = requantize_residual(enc.frame, enc.raw_residual_q8, QualityLevel::rung(r));
    double p = psnr_oracle(cur, decode_frame_full(re, &ref));
    CHECK(p >= prev - 1e-9);
    prev = p;
  }
}

TEST_CASE("requantize of a zero residual stays zero at the coarsest rung") {
  Frame ref = textured(48, 48, 2);
  Frame cur = ref;
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(10));
  auto re = requantize_residual(enc.frame, enc.raw_residual_q8, QualityLevel::rung(0));
  for (auto v : re.residual.values) CHECK(v == 0);
}

TEST_CASE("requantize without retained residual errors") {
  Frame ref = textured(48, 48, 2);
  Frame cur = textured(48, 48, 2, 1, 0);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(5));
  std::vector<int32_t> evicted;
  CHECK_THROWS_AS(requantize_residual(enc.frame, evicted, QualityLevel::rung(3)), ValidationError);
}

TEST_CASE("decode of a P-frame without reference errors") {
  Frame ref = textured(32, 32, 1);
  Frame cur = textured(32, 32, 1, 1, 0);
  cur.index = 1;
  auto enc = encode_p(cur, ref, QualityLevel::rung(5));
  CHECK_THROWS_AS(decode_frame(enc.frame, nullptr, enc.frame.mv.values,
                               enc.frame.residual.values, true),
                  ValidationError);
}

TEST_CASE("encode_p rejects dimension mismatch") {
  Frame ref = Frame::make(32, 32, true);
  Frame cur = Frame::make(48, 32, true);
  CHECK_THROWS_AS(encode_p(cur, ref, QualityLevel::rung(5)), ValidationError);
}

TEST_CASE("420 frames code and decode all planes") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kMovingGradient;
  spec.width = 64;
  spec.height = 48;
  spec.mono = false;
  spec.vx = 2;
  Frame ref = synth_frame(spec, 0);
  Frame cur = synth_frame(spec, 1);
  auto enc = encode_p(cur, ref, QualityLevel::rung(10));
  auto dec = decode_frame_full(enc.frame, &ref);
  CHECK(psnr_oracle(cur, dec) > 38.0);
  // chroma reconstructed too
  double cmse = 0;
  for (size_t i = 0; i < cur.cb.size(); ++i) {
    double d = static_cast<double>(cur.cb[i]) - dec.cb[i];
    cmse += d * d;
  }
  CHECK(cmse / static_cast<double>(cur.cb.size()) < 30.0);
}

TEST_CASE("ipatch_region partitions: k=10 disjoint cover") {
  std::set<std::pair<int, int>> covered;
  int k_eff = ipatch_region(0, 640, 352, 10).k_effective;
  CHECK(k_eff == 10);
  for (uint32_t i = 0; i < 10; ++i) {
    auto r = ipatch_region(i, 640, 352, 10);
    for (int y = r.rect.mb_y; y < r.rect.mb_y + r.rect.mb_h; ++y) {
      for (int x = r.rect.mb_x; x < r.rect.mb_x + r.rect.mb_w; ++x) {
        CHECK(covered.insert({x, y}).second);  // disjoint
      }
    }
  }
  CHECK(covered.size() == static_cast<size_t>(40 * 22));  // full cover
}

TEST_CASE("ipatch_region is periodic in the frame index") {
  auto a = ipatch_region(7, 640, 352, 10);
  auto b = ipatch_region(17, 640, 352, 10);
  CHECK(a.rect == b.rect);
}

TEST_CASE("ipatch_region k=30 on 1280x720 is exact and aligned") {
  std::set<std::pair<int, int>> covered;
  int min_area = 1 << 30, max_area = 0;
  for (uint32_t i = 0; i < 30; ++i) {
    auto r = ipatch_region(i, 1280, 720, 30);
    CHECK(r.k_effective == 30);
    min_area = std::min(min_area, r.rect.area());
    max_area = std::max(max_area, r.rect.area());
    for (int y = r.rect.mb_y; y < r.rect.mb_y + r.rect.mb_h; ++y) {
      for (int x = r.rect.mb_x; x < r.rect.mb_x + r.rect.mb_w; ++x) {
        CHECK(covered.insert({x, y}).second);
      }
    }
  }
  CHECK(covered.size() == static_cast<size_t>(80 * 45));
  // areas within one macroblock row of each other
  CHECK(max_area - min_area <= 80);
}

TEST_CASE("infeasible k falls back to a feasible k' <= k") {
  auto r = ipatch_region(0, 16, 16, 30);  // single macroblock
  CHECK(r.k_effective == 1);
  CHECK(r.rect.area() == 1);
}

TEST_CASE("ipatch coverage: every pixel refreshed once per k frames") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = 64;
  spec.height = 48;
  spec.seed = 88;
  Frame target = synth_frame(spec, 0);

  // Start from a wrong reference; apply k P-frames whose only payload is the
  // I-patch (zero mv, zero residual). After k frames the frame must equal
  // the intra-coded target everywhere.
  Frame wrong = Frame::make(64, 48, true);
  std::fill(wrong.y.begin(), wrong.y.end(), 0);
  int k = 12;
  Frame ref = wrong;
  auto q = QualityLevel::rung(10);
  for (uint32_t t = 0; t < static_cast<uint32_t>(ipatch_region(0, 64, 48, k).k_effective); ++t) {
    Frame cur = target;
    cur.index = t;
    auto enc = encode_p(cur, ref, q, {.search_range = 0, .ipatch_k = 0});
    // strip motion and residual, keep only the patch
    std::fill(enc.frame.mv.values.begin(), enc.frame.mv.values.end(), 0);
    std::fill(enc.frame.residual.values.begin(), enc.frame.residual.values.end(), 0);
    attach_ipatch(enc.frame, cur, k, q);
    ref = decode_frame_full(enc.frame, &ref);
  }
  auto full_i = decode_frame_full(encode_i(target, q).frame, nullptr);
  CHECK(ref.y == full_i.y);
}

TEST_CASE("fast_redecode equals receiver-side sequential decode bit-exactly") {
  Rng rng(606);
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = 64;
  spec.height = 64;
  spec.seed = 14;
  spec.vx = 1;

  Frame f0 = synth_frame(spec, 0);
  auto q = QualityLevel::rung(8);
  auto i0 = encode_i(f0, q);
  Frame ref_enc = decode_frame_full(i0.frame, nullptr);

  std::vector<EncodedFrame> frames;
  std::vector<FrameMasks> masks;
  Frame ref_receiver = ref_enc;
  Frame ref_chain = ref_enc;

  for (uint32_t t = 1; t <= 5; ++t) {
    Frame cur = synth_frame(spec, t);
    auto enc = encode_p(cur, ref_enc, q);
    attach_ipatch(enc.frame, cur, 10, q);
    // encoder reference is the optimistic (full) decode
    ref_enc = decode_frame_full(enc.frame, &ref_enc);

    FrameMasks m;
    if (t == 1 || t == 3) {
      m.mv_values = masked(enc.frame.mv.values, 0.4, rng);
      m.residual_values = masked(enc.frame.residual.values, 0.4, rng);
      m.ipatch_present = t != 3;
    }
    // receiver-side decode with those exact masks
    const auto& mv = m.mv_values.empty() ? enc.frame.mv.values : m.mv_values;
    const auto& res = m.residual_values.empty() ? enc.frame.residual.values : m.residual_values;
    ref_receiver = decode_frame(enc.frame, &ref_receiver, mv, res, m.ipatch_present);

    frames.push_back(enc.frame);
    masks.push_back(std::move(m));
  }

  std::vector<const EncodedFrame*> chain;
  for (const auto& f : frames) chain.push_back(&f);
  Frame resynced = fast_redecode(chain, masks, ref_chain);
  CHECK(resynced == ref_receiver);
}

TEST_CASE("fast_redecode costs well under half of encode_p per frame") {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = 320;
  spec.height = 192;
  spec.seed = 4;
  spec.vx = 2;
  Frame ref = synth_frame(spec, 0);
  auto q = QualityLevel::rung(8);

  std::vector<EncodedFrame> frames;
  Frame enc_ref = ref;
  auto t0 = std::chrono::steady_clock::now();
  for (uint32_t t = 1; t <= 6; ++t) {
    Frame cur = synth_frame(spec, t);
    auto enc = encode_p(cur, enc_ref, q);
    enc_ref = decode_frame_full(enc.frame, &enc_ref);
    frames.push_back(enc.frame);
  }
  auto t1 = std::chrono::steady_clock::now();

  std::vector<const EncodedFrame*> chain;
  for (const auto& f : frames) chain.push_back(&f);
  std::vector<FrameMasks> masks(frames.size());
  Frame out = fast_redecode(chain, masks, ref);
  auto t2 = std::chrono::steady_clock::now();

  CHECK(out == enc_ref);
  double encode_cost = std::chrono::duration<double>(t1 - t0).count();
  double redecode_cost = std::chrono::duration<double>(t2 - t1).count();
  CHECK(redecode_cost <= 0.5 * encode_cost);
}
