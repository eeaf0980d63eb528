// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "shardcast/codec.hpp"
#include "shardcast/entropy.hpp"
#include "shardcast/fec.hpp"
#include "shardcast/packetize.hpp"
#include "shardcast/timeline.hpp"
#include "shardcast/wire.hpp"

namespace shardcast {

enum class ControllerKind : uint8_t { kOracleTrace = 0, kDelayAimd = 1 };

struct TransportConfig {
  Scheme scheme = Scheme::kShard;
  int fps = 25;
  int mtu = kDefaultMtu;
  size_t cache_window = 32;
  int ipatch_k = 30;                  // 0 disables I-patches
  uint32_t iframe_interval = 1000;
  int64_t decode_timeout_us = 400000;  // T_max
  CodecConfig codec;
  int svc_layers = 4;
  double svc_base_redundancy = 0.5;
  double fec_floor = 0.1;
  double fec_cap = 0.5;

  int64_t frame_interval_us() const { return 1000000 / fps; }
};

struct VideoParams {
  int width = 0;
  int height = 0;
  bool mono = true;
};

// --- rate control -------------------------------------------------------------

class RateController {
 public:
  virtual ~RateController() = default;
  virtual int64_t target_bps(int64_t now_us) = 0;
  // One sample per frame feedback: end-to-end frame delay and loss flag.
  virtual void on_frame_feedback(int64_t now_us, int64_t frame_delay_us, bool loss) {
    (void)now_us;
    (void)frame_delay_us;
    (void)loss;
  }
};

// Idealized controller for codec-isolation runs: a fixed fraction of the
// current trace bandwidth.
class OracleTraceController : public RateController {
 public:
  OracleTraceController(BandwidthTrace trace, double fraction = 0.85)
      : trace_(std::move(trace)), fraction_(fraction) {}
  int64_t target_bps(int64_t now_us) override {
    return static_cast<int64_t>(fraction_ * static_cast<double>(trace_.rate_at_us(now_us)));
  }

 private:
  BandwidthTrace trace_;
  double fraction_;
};

// Delay-gradient AIMD: multiplicative decrease x0.85 on loss or on a queuing
// delay gradient above threshold (held down to once per 100 ms), otherwise
// +5%/s, clamped to [0.2, 12] Mbps.
class DelayAimdController : public RateController {
 public:
  explicit DelayAimdController(int64_t initial_bps = 1000000) : target_(initial_bps) {}

  int64_t target_bps(int64_t) override { return target_; }
  void on_frame_feedback(int64_t now_us, int64_t frame_delay_us, bool loss) override;

  static constexpr int64_t kMinBps = 200000;
  static constexpr int64_t kMaxBps = 12000000;
  static constexpr double kDecrease = 0.85;
  static constexpr double kIncreasePerSec = 0.05;
  static constexpr double kGradientThreshold = 0.05;  // 50 ms of queuing growth per second
  static constexpr int64_t kHolddownUs = 100000;

 private:
  int64_t target_;
  int64_t min_delay_us_ = -1;
  int64_t prev_qdelay_us_ = 0;
  int64_t prev_time_us_ = -1;
  int64_t last_decrease_us_ = -1;
};

std::unique_ptr<RateController> make_controller(ControllerKind kind, const BandwidthTrace& trace,
                                                int64_t initial_bps = 1000000);

// --- sender -------------------------------------------------------------------

// Idealized layered-coding quality hook: the SVC baseline renders a frame at
// the quality the reference codec reaches with the bytes that survived.
// Sender-side state is registered here and consumed by the receiver; both
// ends of a simulation share one instance.
class SvcQualityOracle {
 public:
  struct Entry {
    EncodedFrame frame;
    std::vector<int32_t> raw_residual_q8;
    Frame reference;  // lossless reconstruction the frame was encoded against
    bool has_reference = false;
    std::vector<size_t> rung_bytes;  // estimated wire bytes per rung
  };

  void put(uint32_t frame_id, Entry e);
  // Decode at the best rung whose size fits usable_bytes.
  Frame render(uint32_t frame_id, size_t usable_bytes) const;
  void prune_before(uint32_t frame_id);

 private:
  std::map<uint32_t, Entry> entries_;
};

struct SenderOutput {
  std::vector<std::vector<uint8_t>> packets;
  uint32_t frame_id = 0;
};

class Sender {
 public:
  Sender(TransportConfig config, VideoParams video, std::unique_ptr<RateController> controller,
         std::shared_ptr<SvcQualityOracle> svc_oracle = nullptr);

  // Encodes the next frame against the optimistic reference, selects the
  // quality rung against the controller budget, packetizes. Call once per
  // frame interval.
  SenderOutput encode_tick(const Frame& source, int64_t now_us, SessionTimeline& timeline);

  // Processes the receiver's per-frame report: drives resync (shard),
  // redundancy adaptation (fec) and reference selection (fec/skip).
  void on_feedback(const Feedback& fb, int64_t now_us);

  // One resend attempt for a frame the receiver reported fully missing.
  std::vector<std::vector<uint8_t>> on_resend_request(uint32_t frame_id, int64_t now_us);

  int64_t current_target_bps(int64_t now_us) { return controller_->target_bps(now_us); }
  uint32_t next_frame_id() const { return next_frame_id_; }
  const Frame* optimistic_reference() const;
  RateController& controller() { return *controller_; }

 private:
  struct GroupInfo {
    WireTensorKind kind = WireTensorKind::kResidual;
    uint16_t start = 0;
    uint16_t n = 0;
    uint32_t m = 0;
    uint16_t p = 0;  // multiplier (shard) or parity count (opaque)
  };
  struct CacheEntry {
    uint32_t frame_id = 0;
    EncodedFrame frame;
    Frame recon;  // receiver-view reconstruction
    std::vector<GroupInfo> groups;
    std::vector<std::vector<uint8_t>> packets;  // serialized, for resends
    bool mask_known = false;
    FrameMasks masks;
    int64_t encode_start_us = 0;
    bool complete_acked = false;
  };

  SenderOutput encode_tick_shard(const Frame& source, int64_t now_us, SessionTimeline& timeline);
  SenderOutput encode_tick_mono(const Frame& source, int64_t now_us, SessionTimeline& timeline);
  void resync_from(uint32_t frame_id);
  CacheEntry* find_cache(uint32_t frame_id);
  int select_rung(const EncodeResult& er, const std::vector<int32_t>& patch_raw_q8,
                  size_t patch_blocks, size_t budget_bytes, bool* overshoot) const;
  size_t estimate_frame_bytes(const EncodedFrame& frame) const;

  TransportConfig config_;
  VideoParams video_;
  std::unique_ptr<RateController> controller_;
  std::shared_ptr<SvcQualityOracle> svc_oracle_;
  FecRateController fec_controller_;

  uint32_t next_frame_id_ = 0;
  int rung_guess_ = kNumRungs - 1;
  bool force_iframe_ = false;

  // Receiver-view anchor: reconstruction of the newest frame known to be
  // bit-identical at the receiver; cache covers (anchor, latest].
  std::optional<Frame> anchor_recon_;
  uint32_t anchor_id_ = 0;
  std::deque<CacheEntry> cache_;

  // fec/svc/skip reference selection
  uint32_t last_complete_id_ = 0;
  bool have_complete_ = false;
  bool reference_recovery_ = false;
  std::set<uint32_t> receiver_decoded_;
};

// --- receiver -----------------------------------------------------------------

struct ReceiverOutput {
  std::vector<Feedback> feedback;
  std::vector<uint32_t> resend_requests;
};

class Receiver {
 public:
  using RenderFn = std::function<void(uint32_t frame_id, const Frame&, int64_t now_us)>;

  Receiver(TransportConfig config, VideoParams video,
           std::shared_ptr<SvcQualityOracle> svc_oracle = nullptr);

  void set_render_callback(RenderFn fn) { render_ = std::move(fn); }

  ReceiverOutput on_packet(const std::vector<uint8_t>& bytes, int64_t now_us,
                           SessionTimeline& timeline);
  // Deadline processing; call at next_deadline_us().
  ReceiverOutput on_timer(int64_t now_us, SessionTimeline& timeline);
  // End of session: decode everything pending from whatever arrived.
  ReceiverOutput flush(int64_t now_us, SessionTimeline& timeline);

  int64_t next_deadline_us() const;
  uint32_t next_decode_id() const { return next_decode_id_; }
  const Frame* reconstruction(uint32_t frame_id) const;

 private:
  struct Pending {
    int64_t first_arrival_us = -1;
    int64_t hold_deadline_us = -1;  // total-loss resend deadline
    bool resend_requested = false;
    uint16_t packet_count = 0;
    std::map<uint16_t, Packet> packets;
  };

  ReceiverOutput process(int64_t now_us, SessionTimeline& timeline, bool flush_all);
  void decode_pending(uint32_t frame_id, Pending& p, int64_t now_us, SessionTimeline& timeline,
                      ReceiverOutput& out);
  void decode_shard(uint32_t frame_id, Pending& p, int64_t now_us, SessionTimeline& timeline);
  void decode_mono(uint32_t frame_id, Pending& p, int64_t now_us, SessionTimeline& timeline);
  void store_recon(uint32_t frame_id, Frame f);
  void render_frame(uint32_t frame_id, const Frame& f, int64_t now_us, SessionTimeline& timeline);

  TransportConfig config_;
  VideoParams video_;
  std::shared_ptr<SvcQualityOracle> svc_oracle_;
  RenderFn render_;

  uint32_t next_decode_id_ = 0;
  std::map<uint32_t, Pending> pending_;
  std::deque<std::pair<uint32_t, Frame>> recons_;  // recent reconstructions
};

// Internal helpers shared by the sender, the receiver and the loss-sweep
// harness; exposed for tests.
namespace detail {

// Entropy-codes a whole tensor as one stream (monolithic frame bitstream).
std::vector<uint8_t> encode_tensor_stream(const CodedTensor& t);
// Byte blob holding a complete classic-coded frame (mv + residual tensors).
std::vector<uint8_t> encode_frame_blob(const EncodedFrame& frame);
EncodedFrame decode_frame_blob(const std::vector<uint8_t>& blob, const VideoParams& video,
                               uint32_t frame_id, bool is_predicted, uint8_t reference_offset);

struct ShardGroup {
  WireTensorKind kind;
  TensorDescriptor descriptor;
  MapParams map;
  std::vector<uint8_t> model_bytes;
  std::vector<std::vector<uint8_t>> payloads;  // one per packet of the group
};

// Splits a tensor into n entropy-coded packet payloads under the randomized
// map; n grows until every payload fits max_payload.
ShardGroup make_shard_group(const CodedTensor& t, WireTensorKind kind, size_t max_payload,
                            uint16_t ipatch_k = 0);

// Rebuilds the merged (zero-filled) element array from the received subset.
struct MergedTensor {
  std::vector<int16_t> values;
  uint32_t received_packets = 0;
  uint16_t total_packets = 0;
};
MergedTensor merge_shard_group(const TensorDescriptor& desc, const MapParams& map,
                               const LaplaceModel& model,
                               const std::map<uint16_t, const Packet*>& by_sub_index);

size_t estimate_tensor_wire_bytes(const CodedTensor& t, size_t mtu);

}  // namespace detail

}  // namespace shardcast
