// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "shardcast/frame.hpp"

namespace shardcast {

enum class TensorKind : uint8_t { kMotion = 0, kResidual = 1, kIntra = 2, kOpaque = 3 };
enum class FrameKind : uint8_t { kIntra = 0, kPredicted = 1 };

constexpr int kNumRungs = 11;
constexpr int kDctBlock = 8;

// Quantization ladder. Rung 10 is the finest step; the two interleaved
// halving chains (64,32,16,8,4,2 and 48,24,12,6,3) keep adjacent grids
// nested two rungs apart so reconstruction error is monotone along the
// ladder. Values are steps in Q8.8.
constexpr std::array<uint16_t, kNumRungs> kResidualStepQ8 = {
    16384, 12288, 8192, 6144, 4096, 3072, 2048, 1536, 1024, 768, 512};
constexpr uint16_t kMvStepQ8 = 256;  // 1 px, lossless for integer vectors

struct QualityLevel {
  int index = kNumRungs - 1;
  uint16_t mv_step_q8 = kMvStepQ8;
  uint16_t residual_step_q8 = kResidualStepQ8[kNumRungs - 1];
  uint16_t intra_step_q8 = kResidualStepQ8[kNumRungs - 1];

  static QualityLevel rung(int index);
};

// Quantized coded representation of one frame component. Values are laid out
// channel-major (all of channel 0, then channel 1, ...), so losing a packet
// under the randomized map erases a pseudo-random sprinkle of positions in
// every channel. For DCT tensors channel c holds coefficient position c of
// every 8x8 block; rows counts blocks across all planes and cols is 1. For
// motion tensors channels are (dx, dy) over the macroblock grid.
struct CodedTensor {
  TensorKind kind = TensorKind::kResidual;
  uint16_t channels = 0;
  uint16_t rows = 0;
  uint16_t cols = 0;
  uint8_t rung = kNumRungs - 1;
  std::vector<uint16_t> step_q8;  // per-channel quantization step, > 0
  std::vector<int16_t> values;    // channels*rows*cols entries in [-1024, 1023]

  size_t element_count() const {
    return static_cast<size_t>(channels) * rows * cols;
  }
  size_t per_channel() const { return static_cast<size_t>(rows) * cols; }
  void validate() const;

  // Channel ids for a contiguous range of element indices, matching the
  // channel-major layout. Used when entropy-coding packet element lists.
  uint8_t channel_of(uint32_t element_index) const {
    return static_cast<uint8_t>(element_index / per_channel());
  }

  bool operator==(const CodedTensor& o) const {
    return kind == o.kind && channels == o.channels && rows == o.rows && cols == o.cols &&
           rung == o.rung && step_q8 == o.step_q8 && values == o.values;
  }
};

// Macroblock-aligned rectangle, in macroblock units on the luma grid.
struct MbRect {
  int mb_x = 0;
  int mb_y = 0;
  int mb_w = 0;
  int mb_h = 0;
  bool operator==(const MbRect& o) const {
    return mb_x == o.mb_x && mb_y == o.mb_y && mb_w == o.mb_w && mb_h == o.mb_h;
  }
  int area() const { return mb_w * mb_h; }
};

// Small intra-coded refresh region attached to a P-frame. Regions cycle so
// that any k consecutive frames repaint the whole frame exactly once.
struct IPatch {
  MbRect region;
  uint8_t k = 30;
  CodedTensor tensor;  // kIntra over the region's blocks (all planes)
};

struct EncodedFrame {
  uint32_t frame_id = 0;
  FrameKind kind = FrameKind::kIntra;
  uint32_t reference_id = 0;  // P-frames only
  CodedTensor mv;             // P-frames only
  CodedTensor residual;       // kIntra tensor for I-frames
  std::optional<IPatch> ipatch;
  int width = 0;
  int height = 0;
  bool mono = true;
};

struct CodecConfig {
  int search_range = 8;  // full-search window, +-R integer pixels
  int ipatch_k = 30;     // 0 disables I-patches
};

// Result of encoding: the wire-ready frame plus the unquantized residual
// DCT coefficients (Q8) kept for same-frame requantization.
struct EncodeResult {
  EncodedFrame frame;
  std::vector<int32_t> raw_residual_q8;
};

EncodeResult encode_i(const Frame& frame, const QualityLevel& q);
EncodeResult encode_p(const Frame& frame, const Frame& reference, const QualityLevel& q,
                      const CodecConfig& config = {});

// Re-quantizes the residual/intra tensor at a different rung without redoing
// motion search. Bit-identical to the original when q.index matches.
EncodedFrame requantize_residual(const EncodedFrame& frame,
                                 const std::vector<int32_t>& raw_residual_q8,
                                 const QualityLevel& q);

// Deterministic decode. `mv_values` / `residual_values` are the merged
// element arrays (zeros where packets were lost); pass the tensors' own
// values for lossless decode. Zeroed motion elements decode as zero
// displacement components. P-frames require a reference of matching
// dimensions. `ipatch_present` applies the frame's I-patch, if any.
Frame decode_frame(const EncodedFrame& frame, const Frame* reference,
                   const std::vector<int16_t>& mv_values,
                   const std::vector<int16_t>& residual_values, bool ipatch_present = true);

inline Frame decode_frame_full(const EncodedFrame& frame, const Frame* reference) {
  return decode_frame(frame, reference, frame.mv.values, frame.residual.values, true);
}

// I-patch placement: partitions the mbCols x mbRows grid into k_effective
// near-equal macroblock-aligned rectangles and returns frame_index's one.
// k_effective is the largest feasible k' <= k (areas within one patch row).
struct IPatchRegion {
  MbRect rect;
  int k_effective = 0;
};
IPatchRegion ipatch_region(uint32_t frame_index, int width, int height, int k);

// Intra-codes this frame's refresh region from the source pixels and
// attaches it. Call after rung selection so the patch rides at the frame's
// final rung.
void attach_ipatch(EncodedFrame& frame, const Frame& source, int k, const QualityLevel& q);

// Unquantized intra DCT coefficients (Q8) of the region's blocks; used for
// probing I-patch coded size across rungs without re-running the transform.
std::vector<int32_t> intra_region_raw_q8(const Frame& source, const MbRect& region);

// Quantizes raw Q8 coefficients at a step; the scalar core of requantize.
std::vector<int16_t> quantize_raw_q8(const std::vector<int32_t>& raw_q8, uint16_t step_q8);

// --- resync-side cache -------------------------------------------------------

// Per-frame tensors retained for replaying the receiver's decodes.
struct CachedFrame {
  uint32_t frame_id = 0;
  EncodedFrame frame;
};

// Decoder-visible state: the reconstruction plus a window of recent coded
// frames (oldest evicted first) used by dynamic state resync.
class ReferenceState {
 public:
  explicit ReferenceState(size_t window = 32) : window_(window) {}

  void reset(uint32_t frame_id, Frame recon) {
    frame_id_ = frame_id;
    recon_ = std::move(recon);
    has_frame_ = true;
  }

  bool has_frame() const { return has_frame_; }
  uint32_t frame_id() const { return frame_id_; }
  const Frame& reconstruction() const { return recon_; }

  void cache_frame(CachedFrame cf) {
    cache_.push_back(std::move(cf));
    while (cache_.size() > window_) cache_.pop_front();
  }
  void drop_cached_through(uint32_t frame_id) {
    while (!cache_.empty() && cache_.front().frame_id <= frame_id) cache_.pop_front();
  }
  const std::deque<CachedFrame>& cache() const { return cache_; }
  size_t window() const { return window_; }

 private:
  size_t window_;
  uint32_t frame_id_ = 0;
  Frame recon_;
  bool has_frame_ = false;
  std::deque<CachedFrame> cache_;
};

// Receiver-exact masks for one frame of a resync chain.
struct FrameMasks {
  // Empty vectors mean "fully received". Otherwise merged values as the
  // receiver saw them (zeros at lost positions).
  std::vector<int16_t> mv_values;
  std::vector<int16_t> residual_values;
  bool ipatch_present = true;
  // Every packet of the frame was lost: the receiver froze on its previous
  // reconstruction, so the replay copies the reference instead of decoding.
  bool total_loss = false;
};

// Replays the receiver's decodes of `chain` (oldest first, each frame
// referencing the previous) from `start_reference`, applying the exact
// per-frame masks. No motion search runs; this is the cheap resync path.
Frame fast_redecode(const std::vector<const EncodedFrame*>& chain,
                    const std::vector<FrameMasks>& masks, const Frame& start_reference);

}  // namespace shardcast
