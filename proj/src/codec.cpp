// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "shardcast/codec.hpp"

namespace shardcast {

namespace {

// Orthonormal 8x8 DCT-II basis in Q14: row k holds
// s_k * cos((2j+1) k pi / 16) with s_0 = 1/sqrt(8), s_k = 1/2.
// Hardcoded so encode/decode are bit-exact on every platform; resync
// equality depends on it.
constexpr int32_t kDctQ14[8][8] = {
    {5793, 5793, 5793, 5793, 5793, 5793, 5793, 5793},
    {8035, 6811, 4551, 1598, -1598, -4551, -6811, -8035},
    {7568, 3135, -3135, -7568, -7568, -3135, 3135, 7568},
    {6811, -1598, -8035, -4551, 4551, 8035, 1598, -6811},
    {5793, -5793, -5793, 5793, 5793, -5793, -5793, 5793},
    {4551, -8035, 1598, 6811, -6811, -1598, 8035, -4551},
    {3135, -7568, 7568, -3135, -3135, 7568, -7568, 3135},
    {1598, -4551, 6811, -8035, 8035, -6811, 4551, -1598},
};

inline int32_t round_shift(int64_t v, int bits) {
  return static_cast<int32_t>((v + (int64_t{1} << (bits - 1))) >> bits);
}

// Forward transform: integer samples in, coefficients in Q8 out.
void fdct8x8(const int16_t in[64], int32_t out_q8[64]) {
  int32_t tmp[64];  // Q8 after the row pass (Q14 basis, >>6)
  for (int k = 0; k < 8; ++k) {
    for (int j = 0; j < 8; ++j) {
      int64_t acc = 0;
      for (int t = 0; t < 8; ++t) acc += static_cast<int64_t>(kDctQ14[k][t]) * in[t * 8 + j];
      tmp[k * 8 + j] = round_shift(acc, 6);
    }
  }
  for (int k = 0; k < 8; ++k) {
    for (int l = 0; l < 8; ++l) {
      int64_t acc = 0;
      for (int t = 0; t < 8; ++t) acc += static_cast<int64_t>(tmp[k * 8 + t]) * kDctQ14[l][t];
      out_q8[k * 8 + l] = round_shift(acc, 14);
    }
  }
}

// Inverse transform: coefficients in Q8 in, rounded integer samples out.
void idct8x8(const int32_t in_q8[64], int32_t out[64]) {
  int32_t tmp[64];  // Q8 after the column pass
  for (int j = 0; j < 8; ++j) {
    for (int l = 0; l < 8; ++l) {
      int64_t acc = 0;
      for (int t = 0; t < 8; ++t) acc += static_cast<int64_t>(kDctQ14[t][j]) * in_q8[t * 8 + l];
      tmp[j * 8 + l] = round_shift(acc, 14);
    }
  }
  for (int j = 0; j < 8; ++j) {
    for (int jp = 0; jp < 8; ++jp) {
      int64_t acc = 0;
      for (int t = 0; t < 8; ++t) acc += static_cast<int64_t>(tmp[j * 8 + t]) * kDctQ14[t][jp];
      out[j * 8 + jp] = round_shift(round_shift(acc, 14), 8);
    }
  }
}

inline int16_t quantize_coef(int32_t coef_q8, uint16_t step_q8) {
  int32_t a = coef_q8 >= 0 ? coef_q8 : -coef_q8;
  int32_t q = (2 * a + step_q8) / (2 * static_cast<int32_t>(step_q8));
  if (coef_q8 >= 0) return static_cast<int16_t>(std::min(q, 1023));
  return static_cast<int16_t>(-std::min(q, 1024));
}

struct BlockRef {
  int plane;
  int bx;
  int by;
};

struct FrameGeometry {
  int width = 0;
  int height = 0;
  bool mono = true;

  int plane_count() const { return mono ? 1 : 3; }
  int plane_width(int p) const { return p == 0 ? width : width / 2; }
  int plane_height(int p) const { return p == 0 ? height : height / 2; }
  int mb_cols() const { return width / kMacroblock; }
  int mb_rows() const { return height / kMacroblock; }

  static FrameGeometry of(const Frame& f) { return {f.width, f.height, f.mono}; }
  static FrameGeometry of(const EncodedFrame& f) { return {f.width, f.height, f.mono}; }
};

std::vector<BlockRef> frame_blocks(const FrameGeometry& g) {
  std::vector<BlockRef> out;
  for (int p = 0; p < g.plane_count(); ++p) {
    int bw = g.plane_width(p) / kDctBlock;
    int bh = g.plane_height(p) / kDctBlock;
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) out.push_back({p, bx, by});
    }
  }
  return out;
}

// 8x8 blocks covered by a macroblock rect: luma blocks at twice the rect
// resolution, chroma blocks at the rect resolution.
std::vector<BlockRef> region_blocks(const FrameGeometry& g, const MbRect& r) {
  std::vector<BlockRef> out;
  for (int p = 0; p < g.plane_count(); ++p) {
    int scale = p == 0 ? 2 : 1;
    for (int by = r.mb_y * scale; by < (r.mb_y + r.mb_h) * scale; ++by) {
      for (int bx = r.mb_x * scale; bx < (r.mb_x + r.mb_w) * scale; ++bx) out.push_back({p, bx, by});
    }
  }
  return out;
}

void gather_block(const std::vector<uint8_t>& plane, int stride, int bx, int by, int shift,
                  int16_t out[64]) {
  for (int y = 0; y < 8; ++y) {
    const uint8_t* row = plane.data() + static_cast<size_t>(by * 8 + y) * stride + bx * 8;
    for (int x = 0; x < 8; ++x) out[y * 8 + x] = static_cast<int16_t>(row[x] - shift);
  }
}

// DCT-codes a list of blocks into a channel-major tensor (+ raw Q8 coefs).
CodedTensor code_blocks(const Frame& src, const Frame* pred, const std::vector<BlockRef>& blocks,
                        TensorKind kind, const QualityLevel& q, std::vector<int32_t>* raw_q8) {
  CodedTensor t;
  t.kind = kind;
  t.channels = 64;
  t.rows = static_cast<uint16_t>(blocks.size());
  t.cols = 1;
  t.rung = static_cast<uint8_t>(q.index);
  uint16_t step = kind == TensorKind::kIntra ? q.intra_step_q8 : q.residual_step_q8;
  t.step_q8.assign(64, step);
  size_t nb = blocks.size();
  t.values.assign(64 * nb, 0);
  if (raw_q8) raw_q8->assign(64 * nb, 0);

  int16_t px[64];
  int32_t coef[64];
  for (size_t b = 0; b < nb; ++b) {
    const auto& blk = blocks[b];
    int stride = src.plane_width(blk.plane);
    gather_block(src.plane(blk.plane), stride, blk.bx, blk.by, pred ? 0 : 128, px);
    if (pred) {
      int16_t pp[64];
      gather_block(pred->plane(blk.plane), stride, blk.bx, blk.by, 0, pp);
      for (int i = 0; i < 64; ++i) px[i] = static_cast<int16_t>(px[i] - pp[i]);
    }
    fdct8x8(px, coef);
    for (int c = 0; c < 64; ++c) {
      t.values[static_cast<size_t>(c) * nb + b] = quantize_coef(coef[c], step);
      if (raw_q8) (*raw_q8)[static_cast<size_t>(c) * nb + b] = coef[c];
    }
  }
  return t;
}

// Inverse of code_blocks: writes dequantized blocks into dst, adding the
// prediction when present.
void decode_blocks(const std::vector<int16_t>& values, const CodedTensor& meta,
                   const std::vector<BlockRef>& blocks, const Frame* pred, Frame& dst) {
  size_t nb = blocks.size();
  if (values.size() != meta.element_count() || nb != meta.rows) {
    throw ValidationError("decode: tensor element count mismatch");
  }
  int32_t coef[64];
  int32_t sample[64];
  for (size_t b = 0; b < nb; ++b) {
    const auto& blk = blocks[b];
    for (int c = 0; c < 64; ++c) {
      coef[c] = static_cast<int32_t>(values[static_cast<size_t>(c) * nb + b]) * meta.step_q8[static_cast<size_t>(c)];
    }
    idct8x8(coef, sample);
    int stride = dst.plane_width(blk.plane);
    auto& plane = dst.plane(blk.plane);
    if (pred) {
      const auto& pp = pred->plane(blk.plane);
      for (int y = 0; y < 8; ++y) {
        size_t off = static_cast<size_t>(blk.by * 8 + y) * stride + blk.bx * 8;
        for (int x = 0; x < 8; ++x) {
          plane[off + x] = static_cast<uint8_t>(std::clamp(sample[y * 8 + x] + pp[off + x], 0, 255));
        }
      }
    } else {
      for (int y = 0; y < 8; ++y) {
        size_t off = static_cast<size_t>(blk.by * 8 + y) * stride + blk.bx * 8;
        for (int x = 0; x < 8; ++x) {
          plane[off + x] = static_cast<uint8_t>(std::clamp(sample[y * 8 + x] + 128, 0, 255));
        }
      }
    }
  }
}

inline uint8_t sample_clamped(const std::vector<uint8_t>& plane, int w, int h, int x, int y) {
  x = std::clamp(x, 0, w - 1);
  y = std::clamp(y, 0, h - 1);
  return plane[static_cast<size_t>(y) * w + x];
}

// Builds the motion-compensated prediction for all planes. The vector points
// from the current block to its match in the reference, so prediction pixel
// (x, y) samples reference (x + dx, y + dy). Chroma uses dx/2 truncated
// toward zero; out-of-frame samples clamp to the edge.
Frame motion_compensate(const Frame& ref, const std::vector<int16_t>& dxs,
                        const std::vector<int16_t>& dys, int mb_cols, int mb_rows) {
  Frame out = Frame::make(ref.width, ref.height, ref.mono, ref.index);
  for (int p = 0; p < ref.plane_count(); ++p) {
    int w = ref.plane_width(p);
    int h = ref.plane_height(p);
    int mb = p == 0 ? kMacroblock : kMacroblock / 2;
    const auto& src = ref.plane(p);
    auto& dst = out.plane(p);
    for (int my = 0; my < mb_rows; ++my) {
      for (int mx = 0; mx < mb_cols; ++mx) {
        int dx = dxs[static_cast<size_t>(my) * mb_cols + mx];
        int dy = dys[static_cast<size_t>(my) * mb_cols + mx];
        if (p != 0) {
          dx /= 2;
          dy /= 2;
        }
        int x0 = mx * mb;
        int y0 = my * mb;
        bool interior = x0 + dx >= 0 && y0 + dy >= 0 && x0 + mb + dx <= w && y0 + mb + dy <= h;
        if (interior) {
          for (int y = 0; y < mb; ++y) {
            const uint8_t* s = src.data() + static_cast<size_t>(y0 + y + dy) * w + (x0 + dx);
            uint8_t* d = dst.data() + static_cast<size_t>(y0 + y) * w + x0;
            std::memcpy(d, s, static_cast<size_t>(mb));
          }
        } else {
          for (int y = 0; y < mb; ++y) {
            for (int x = 0; x < mb; ++x) {
              dst[static_cast<size_t>(y0 + y) * w + (x0 + x)] =
                  sample_clamped(src, w, h, x0 + x + dx, y0 + y + dy);
            }
          }
        }
      }
    }
  }
  return out;
}

uint32_t block_sad(const std::vector<uint8_t>& cur, const std::vector<uint8_t>& ref, int w, int h,
                   int x0, int y0, int dx, int dy) {
  uint32_t sad = 0;
  bool interior = x0 + dx >= 0 && y0 + dy >= 0 && x0 + kMacroblock + dx <= w && y0 + kMacroblock + dy <= h;
  if (interior) {
    for (int y = 0; y < kMacroblock; ++y) {
      const uint8_t* c = cur.data() + static_cast<size_t>(y0 + y) * w + x0;
      const uint8_t* r = ref.data() + static_cast<size_t>(y0 + y + dy) * w + (x0 + dx);
      for (int x = 0; x < kMacroblock; ++x) sad += static_cast<uint32_t>(std::abs(c[x] - r[x]));
    }
  } else {
    for (int y = 0; y < kMacroblock; ++y) {
      for (int x = 0; x < kMacroblock; ++x) {
        int c = cur[static_cast<size_t>(y0 + y) * w + (x0 + x)];
        int r = sample_clamped(ref, w, h, x0 + x + dx, y0 + y + dy);
        sad += static_cast<uint32_t>(std::abs(c - r));
      }
    }
  }
  return sad;
}

}  // namespace

QualityLevel QualityLevel::rung(int index) {
  if (index < 0 || index >= kNumRungs) {
    throw ValidationError("quality rung " + std::to_string(index) + " out of range");
  }
  QualityLevel q;
  q.index = index;
  q.mv_step_q8 = kMvStepQ8;
  q.residual_step_q8 = kResidualStepQ8[static_cast<size_t>(index)];
  q.intra_step_q8 = kResidualStepQ8[static_cast<size_t>(index)];
  return q;
}

void CodedTensor::validate() const {
  if (values.size() != element_count()) {
    throw ValidationError("tensor value count " + std::to_string(values.size()) +
                          " != channels*rows*cols");
  }
  if (step_q8.size() != channels) throw ValidationError("tensor needs one step per channel");
  for (uint16_t s : step_q8) {
    if (s == 0) throw ValidationError("quantization step must be positive");
  }
  for (int16_t v : values) {
    if (v < -1024 || v > 1023) throw ValidationError("tensor value out of range");
  }
}

EncodeResult encode_i(const Frame& frame, const QualityLevel& q) {
  EncodeResult r;
  r.frame.frame_id = frame.index;
  r.frame.kind = FrameKind::kIntra;
  r.frame.width = frame.width;
  r.frame.height = frame.height;
  r.frame.mono = frame.mono;
  auto blocks = frame_blocks(FrameGeometry::of(frame));
  r.frame.residual = code_blocks(frame, nullptr, blocks, TensorKind::kIntra, q, &r.raw_residual_q8);
  return r;
}

EncodeResult encode_p(const Frame& frame, const Frame& reference, const QualityLevel& q,
                      const CodecConfig& config) {
  if (!frame.same_dims(reference)) {
    throw ValidationError("encode_p: frame/reference dimension mismatch");
  }
  const int R = config.search_range;
  const FrameGeometry g = FrameGeometry::of(frame);
  const int mb_cols = g.mb_cols();
  const int mb_rows = g.mb_rows();

  EncodeResult r;
  r.frame.frame_id = frame.index;
  r.frame.kind = FrameKind::kPredicted;
  r.frame.reference_id = reference.index;
  r.frame.width = frame.width;
  r.frame.height = frame.height;
  r.frame.mono = frame.mono;

  // Full-search block motion on luma, SAD cost. Ties break toward the
  // smallest |dx|+|dy|, then smallest dy, then smallest dx.
  std::vector<int16_t> dxs(static_cast<size_t>(mb_cols) * mb_rows);
  std::vector<int16_t> dys(dxs.size());
  for (int my = 0; my < mb_rows; ++my) {
    for (int mx = 0; mx < mb_cols; ++mx) {
      uint32_t best_sad = std::numeric_limits<uint32_t>::max();
      int best_dist = 0, best_dy = 0, best_dx = 0;
      for (int dy = -R; dy <= R; ++dy) {
        for (int dx = -R; dx <= R; ++dx) {
          uint32_t sad = block_sad(frame.y, reference.y, frame.width, frame.height,
                                   mx * kMacroblock, my * kMacroblock, dx, dy);
          int dist = std::abs(dx) + std::abs(dy);
          bool better = sad < best_sad ||
                        (sad == best_sad &&
                         (dist < best_dist ||
                          (dist == best_dist && (dy < best_dy || (dy == best_dy && dx < best_dx)))));
          if (better) {
            best_sad = sad;
            best_dist = dist;
            best_dy = dy;
            best_dx = dx;
          }
        }
      }
      dxs[static_cast<size_t>(my) * mb_cols + mx] = static_cast<int16_t>(best_dx);
      dys[static_cast<size_t>(my) * mb_cols + mx] = static_cast<int16_t>(best_dy);
    }
  }

  CodedTensor mv;
  mv.kind = TensorKind::kMotion;
  mv.channels = 2;
  mv.rows = static_cast<uint16_t>(mb_rows);
  mv.cols = static_cast<uint16_t>(mb_cols);
  mv.rung = static_cast<uint8_t>(q.index);
  mv.step_q8.assign(2, q.mv_step_q8);
  mv.values.reserve(2 * dxs.size());
  mv.values.insert(mv.values.end(), dxs.begin(), dxs.end());
  mv.values.insert(mv.values.end(), dys.begin(), dys.end());
  r.frame.mv = std::move(mv);

  Frame pred = motion_compensate(reference, dxs, dys, mb_cols, mb_rows);
  auto blocks = frame_blocks(g);
  r.frame.residual = code_blocks(frame, &pred, blocks, TensorKind::kResidual, q, &r.raw_residual_q8);
  return r;
}

EncodedFrame requantize_residual(const EncodedFrame& frame,
                                 const std::vector<int32_t>& raw_residual_q8,
                                 const QualityLevel& q) {
  if (raw_residual_q8.size() != frame.residual.element_count()) {
    throw ValidationError("requantize: raw residual unavailable for this frame");
  }
  EncodedFrame out = frame;
  uint16_t step = frame.residual.kind == TensorKind::kIntra ? q.intra_step_q8 : q.residual_step_q8;
  out.residual.rung = static_cast<uint8_t>(q.index);
  out.residual.step_q8.assign(out.residual.channels, step);
  for (size_t i = 0; i < raw_residual_q8.size(); ++i) {
    out.residual.values[i] = quantize_coef(raw_residual_q8[i], step);
  }
  if (out.ipatch.has_value()) {
    // The I-patch rides at the frame's rung; its raw coefficients are not
    // retained, so requantization keeps the original patch tensor.
  }
  return out;
}

Frame decode_frame(const EncodedFrame& frame, const Frame* reference,
                   const std::vector<int16_t>& mv_values,
                   const std::vector<int16_t>& residual_values, bool ipatch_present) {
  const FrameGeometry g = FrameGeometry::of(frame);
  Frame out = Frame::make(frame.width, frame.height, frame.mono, frame.frame_id);

  if (frame.kind == FrameKind::kIntra) {
    auto blocks = frame_blocks(g);
    decode_blocks(residual_values, frame.residual, blocks, nullptr, out);
  } else {
    if (reference == nullptr) {
      throw ValidationError("decode: P-frame requires a reference");
    }
    if (reference->width != frame.width || reference->height != frame.height ||
        reference->mono != frame.mono) {
      throw ValidationError("decode: reference dimension mismatch");
    }
    size_t mbs = static_cast<size_t>(g.mb_cols()) * g.mb_rows();
    if (mv_values.size() != 2 * mbs) throw ValidationError("decode: motion tensor size mismatch");
    std::vector<int16_t> dxs(mv_values.begin(), mv_values.begin() + static_cast<long>(mbs));
    std::vector<int16_t> dys(mv_values.begin() + static_cast<long>(mbs), mv_values.end());
    Frame pred = motion_compensate(*reference, dxs, dys, g.mb_cols(), g.mb_rows());
    auto blocks = frame_blocks(g);
    decode_blocks(residual_values, frame.residual, blocks, &pred, out);
  }

  if (frame.ipatch.has_value() && ipatch_present) {
    auto blocks = region_blocks(g, frame.ipatch->region);
    decode_blocks(frame.ipatch->tensor.values, frame.ipatch->tensor, blocks, nullptr, out);
  }
  return out;
}

IPatchRegion ipatch_region(uint32_t frame_index, int width, int height, int k) {
  if (width <= 0 || height <= 0 || width % kMacroblock || height % kMacroblock) {
    throw ValidationError("ipatch_region: bad frame dimensions");
  }
  int rows = height / kMacroblock;
  int cols = width / kMacroblock;
  if (k < 1) throw ValidationError("ipatch_region: k must be >= 1");
  k = std::min(k, rows * cols);

  // Pick the largest k' <= k with a factorization kr*kc = k' whose grid
  // areas stay within one patch row of each other. Among feasible pairs,
  // prefer the smallest spread, then the squarest grid.
  int best_k = 1, best_kr = 1, best_kc = 1;
  for (int kp = k; kp >= 1; --kp) {
    int spread_best = std::numeric_limits<int>::max();
    int kr_best = 0, kc_best = 0;
    for (int kr = 1; kr <= kp; ++kr) {
      if (kp % kr) continue;
      int kc = kp / kr;
      if (kr > rows || kc > cols) continue;
      int area_max = ((rows + kr - 1) / kr) * ((cols + kc - 1) / kc);
      int area_min = (rows / kr) * (cols / kc);
      int spread = area_max - area_min;
      if (spread > (cols + kc - 1) / kc) continue;
      bool better = spread < spread_best ||
                    (spread == spread_best && std::abs(kr - kc) < std::abs(kr_best - kc_best));
      if (better) {
        spread_best = spread;
        kr_best = kr;
        kc_best = kc;
      }
    }
    if (kr_best > 0) {
      best_k = kp;
      best_kr = kr_best;
      best_kc = kc_best;
      break;
    }
  }

  int p = static_cast<int>(frame_index % static_cast<uint32_t>(best_k));
  int pr = p / best_kc;
  int pc = p % best_kc;
  MbRect rect;
  rect.mb_y = pr * rows / best_kr;
  rect.mb_h = (pr + 1) * rows / best_kr - rect.mb_y;
  rect.mb_x = pc * cols / best_kc;
  rect.mb_w = (pc + 1) * cols / best_kc - rect.mb_x;
  return {rect, best_k};
}

void attach_ipatch(EncodedFrame& frame, const Frame& source, int k, const QualityLevel& q) {
  if (k < 1) return;
  auto region = ipatch_region(frame.frame_id, source.width, source.height, k);
  IPatch patch;
  patch.region = region.rect;
  patch.k = static_cast<uint8_t>(region.k_effective);
  auto blocks = region_blocks(FrameGeometry::of(source), region.rect);
  patch.tensor = code_blocks(source, nullptr, blocks, TensorKind::kIntra, q, nullptr);
  frame.ipatch = std::move(patch);
}

std::vector<int32_t> intra_region_raw_q8(const Frame& source, const MbRect& region) {
  auto blocks = region_blocks(FrameGeometry::of(source), region);
  std::vector<int32_t> raw;
  code_blocks(source, nullptr, blocks, TensorKind::kIntra, QualityLevel::rung(0), &raw);
  return raw;
}

std::vector<int16_t> quantize_raw_q8(const std::vector<int32_t>& raw_q8, uint16_t step_q8) {
  std::vector<int16_t> out(raw_q8.size());
  for (size_t i = 0; i < raw_q8.size(); ++i) out[i] = quantize_coef(raw_q8[i], step_q8);
  return out;
}

Frame fast_redecode(const std::vector<const EncodedFrame*>& chain,
                    const std::vector<FrameMasks>& masks, const Frame& start_reference) {
  if (chain.empty()) throw ValidationError("fast_redecode: empty chain");
  if (chain.size() != masks.size()) throw ValidationError("fast_redecode: masks/chain mismatch");
  Frame ref = start_reference;
  for (size_t i = 0; i < chain.size(); ++i) {
    const EncodedFrame& ef = *chain[i];
    const FrameMasks& m = masks[i];
    if (m.total_loss) {
      ref.index = ef.frame_id;  // receiver froze on its previous frame
      continue;
    }
    const auto& mv = m.mv_values.empty() ? ef.mv.values : m.mv_values;
    const auto& res = m.residual_values.empty() ? ef.residual.values : m.residual_values;
    ref = decode_frame(ef, ef.kind == FrameKind::kPredicted ? &ref : nullptr, mv, res,
                       m.ipatch_present);
    ref.index = ef.frame_id;
  }
  return ref;
}

}  // namespace shardcast
