// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>
#include <cstring>

#include "shardcast/transport.hpp"

namespace shardcast {

// --- rate control -------------------------------------------------------------

void DelayAimdController::on_frame_feedback(int64_t now_us, int64_t frame_delay_us, bool loss) {
  if (min_delay_us_ < 0 || frame_delay_us < min_delay_us_) min_delay_us_ = frame_delay_us;
  int64_t qdelay = frame_delay_us - min_delay_us_;

  if (prev_time_us_ >= 0 && now_us > prev_time_us_) {
    double dt_s = static_cast<double>(now_us - prev_time_us_) / 1e6;
    double gradient = static_cast<double>(qdelay - prev_qdelay_us_) / 1e6 / dt_s;
    bool trigger = loss || gradient > kGradientThreshold;
    if (trigger) {
      if (last_decrease_us_ < 0 || now_us - last_decrease_us_ >= kHolddownUs) {
        target_ = static_cast<int64_t>(static_cast<double>(target_) * kDecrease);
        last_decrease_us_ = now_us;
      }
    } else {
      target_ = static_cast<int64_t>(static_cast<double>(target_) * (1.0 + kIncreasePerSec * dt_s));
    }
    target_ = std::clamp(target_, kMinBps, kMaxBps);
  }
  prev_qdelay_us_ = qdelay;
  prev_time_us_ = now_us;
}

std::unique_ptr<RateController> make_controller(ControllerKind kind, const BandwidthTrace& trace,
                                                int64_t initial_bps) {
  if (kind == ControllerKind::kOracleTrace) {
    return std::make_unique<OracleTraceController>(trace);
  }
  return std::make_unique<DelayAimdController>(initial_bps);
}

// --- shared helpers -----------------------------------------------------------

namespace detail {

namespace {

void put_u16b(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}
void put_u32b(std::vector<uint8_t>& out, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>((v >> s) & 0xff));
}
uint16_t get_u16b(const std::vector<uint8_t>& b, size_t& pos) {
  if (pos + 2 > b.size()) throw ParseError("frame blob: truncated");
  uint16_t v = static_cast<uint16_t>(b[pos] << 8 | b[pos + 1]);
  pos += 2;
  return v;
}
uint32_t get_u32b(const std::vector<uint8_t>& b, size_t& pos) {
  if (pos + 4 > b.size()) throw ParseError("frame blob: truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = v << 8 | b[pos + static_cast<size_t>(i)];
  pos += 4;
  return v;
}

std::vector<uint8_t> full_channel_ids(const CodedTensor& t) {
  std::vector<uint8_t> ids(t.values.size());
  size_t per = t.per_channel();
  for (uint16_t c = 0; c < t.channels; ++c) {
    std::fill(ids.begin() + static_cast<long>(c * per), ids.begin() + static_cast<long>((c + 1) * per),
              static_cast<uint8_t>(c));
  }
  return ids;
}

void apply_ladder_steps(CodedTensor& t) {
  auto q = QualityLevel::rung(t.rung);
  uint16_t step = t.kind == TensorKind::kMotion
                      ? q.mv_step_q8
                      : (t.kind == TensorKind::kIntra ? q.intra_step_q8 : q.residual_step_q8);
  t.step_q8.assign(t.channels, step);
}

}  // namespace

std::vector<uint8_t> encode_tensor_stream(const CodedTensor& t) {
  auto model = LaplaceModel::fit(t.values, t.channels);
  auto model_bytes = model.serialize();
  auto stream = encode_packet(t.values, full_channel_ids(t), model);

  std::vector<uint8_t> out;
  out.push_back(static_cast<uint8_t>(t.kind));
  out.push_back(t.rung);
  put_u16b(out, t.channels);
  put_u16b(out, t.rows);
  put_u16b(out, t.cols);
  put_u16b(out, static_cast<uint16_t>(model_bytes.size()));
  out.insert(out.end(), model_bytes.begin(), model_bytes.end());
  put_u32b(out, static_cast<uint32_t>(stream.bytes.size()));
  out.insert(out.end(), stream.bytes.begin(), stream.bytes.end());
  return out;
}

namespace {

CodedTensor decode_tensor_stream(const std::vector<uint8_t>& blob, size_t& pos) {
  if (pos + 2 > blob.size()) throw ParseError("frame blob: truncated tensor header");
  CodedTensor t;
  auto kind = blob[pos++];
  if (kind > 2) throw ParseError("frame blob: bad tensor kind");
  t.kind = static_cast<TensorKind>(kind);
  t.rung = blob[pos++];
  if (t.rung >= kNumRungs) throw ParseError("frame blob: bad rung");
  t.channels = get_u16b(blob, pos);
  t.rows = get_u16b(blob, pos);
  t.cols = get_u16b(blob, pos);
  uint16_t model_len = get_u16b(blob, pos);
  if (pos + model_len > blob.size()) throw ParseError("frame blob: truncated model");
  auto model = LaplaceModel::deserialize(blob.data() + pos, model_len);
  pos += model_len;
  uint32_t stream_len = get_u32b(blob, pos);
  if (pos + stream_len > blob.size()) throw ParseError("frame blob: truncated stream");
  if (model.channels() != t.channels) throw ParseError("frame blob: model/tensor mismatch");

  Bitstream bits;
  bits.bytes.assign(blob.begin() + static_cast<long>(pos), blob.begin() + static_cast<long>(pos + stream_len));
  pos += stream_len;

  t.values.resize(static_cast<size_t>(t.channels) * t.rows * t.cols);
  apply_ladder_steps(t);
  auto ids = full_channel_ids(t);
  t.values = decode_packet(bits, ids, model);
  return t;
}

}  // namespace

std::vector<uint8_t> encode_frame_blob(const EncodedFrame& frame) {
  std::vector<uint8_t> out;
  bool predicted = frame.kind == FrameKind::kPredicted;
  out.push_back(predicted ? 2 : 1);  // tensor count
  if (predicted) {
    auto mv = encode_tensor_stream(frame.mv);
    out.insert(out.end(), mv.begin(), mv.end());
  }
  auto res = encode_tensor_stream(frame.residual);
  out.insert(out.end(), res.begin(), res.end());
  return out;
}

EncodedFrame decode_frame_blob(const std::vector<uint8_t>& blob, const VideoParams& video,
                               uint32_t frame_id, bool is_predicted, uint8_t reference_offset) {
  if (blob.empty()) throw ParseError("frame blob: empty");
  size_t pos = 0;
  uint8_t count = blob[pos++];
  if (count < 1 || count > 2 || (count == 2) != is_predicted) {
    throw ParseError("frame blob: tensor count mismatch");
  }
  EncodedFrame f;
  f.frame_id = frame_id;
  f.kind = is_predicted ? FrameKind::kPredicted : FrameKind::kIntra;
  f.reference_id = is_predicted ? frame_id - reference_offset : 0;
  f.width = video.width;
  f.height = video.height;
  f.mono = video.mono;
  if (is_predicted) f.mv = decode_tensor_stream(blob, pos);
  f.residual = decode_tensor_stream(blob, pos);
  f.residual.validate();
  if (is_predicted) f.mv.validate();
  return f;
}

ShardGroup make_shard_group(const CodedTensor& t, WireTensorKind kind, size_t mtu,
                            uint16_t ipatch_k) {
  ShardGroup g;
  g.kind = kind;
  auto model = LaplaceModel::fit(t.values, t.channels);
  g.model_bytes = model.serialize();
  size_t max_payload = mtu - kFixedHeaderBytes - g.model_bytes.size();

  auto m = static_cast<uint32_t>(t.values.size());
  uint64_t cost_bytes = tensor_cost_q8(t.values, t.channels, model) / 256 / 8 + 1;
  auto n = static_cast<uint16_t>(
      std::max<uint64_t>(2, (cost_bytes + 8 * std::max<uint64_t>(1, cost_bytes / 1024)) / max_payload + 1));
  n = static_cast<uint16_t>(std::min<uint32_t>(n, m / 2 >= 2 ? m / 2 : 2));

  size_t per_channel = t.per_channel();
  for (;; ++n) {
    if (n > m) throw ValidationError("shard group: tensor too small to packetize");
    auto map = PacketizationMap::with_auto_multiplier(m, n);
    std::vector<std::vector<uint8_t>> payloads;
    payloads.reserve(n);
    bool fits = true;
    for (uint16_t j = 0; j < n && fits; ++j) {
      auto idx = map.packet_elements(j);
      std::vector<int16_t> vals;
      std::vector<uint8_t> ids;
      vals.reserve(idx.size());
      ids.reserve(idx.size());
      for (uint32_t i : idx) {
        vals.push_back(t.values[i]);
        ids.push_back(static_cast<uint8_t>(i / per_channel));
      }
      auto bits = encode_packet(vals, ids, model);
      if (bits.bytes.size() > max_payload) {
        fits = false;
        break;
      }
      payloads.push_back(std::move(bits.bytes));
    }
    if (!fits) continue;

    g.map = {m, n, map.multiplier()};
    g.payloads = std::move(payloads);
    break;
  }

  g.descriptor.kind = kind;
  g.descriptor.rung = t.rung;
  g.descriptor.channels = static_cast<uint8_t>(t.channels);
  g.descriptor.rows = t.rows;
  g.descriptor.cols = kind == WireTensorKind::kIPatch ? ipatch_k : t.cols;
  return g;
}

MergedTensor merge_shard_group(const TensorDescriptor& desc, const MapParams& map,
                               const LaplaceModel& model,
                               const std::map<uint16_t, const Packet*>& by_sub_index) {
  size_t cols = desc.kind == WireTensorKind::kIPatch ? 1 : desc.cols;
  size_t expect = static_cast<size_t>(desc.channels) * desc.rows * cols;
  if (expect != map.m) throw ParseError("shard group: descriptor/map element count mismatch");
  if (model.channels() != desc.channels) throw ParseError("shard group: model channels mismatch");

  PacketizationMap pmap(map.m, map.n, map.p);
  size_t per_channel = expect / desc.channels;

  std::vector<std::optional<std::vector<int16_t>>> received(map.n);
  MergedTensor out;
  out.total_packets = map.n;
  for (const auto& [sub, pkt] : by_sub_index) {
    if (sub >= map.n) throw ParseError("shard group: packet sub-index out of range");
    auto idx = pmap.packet_elements(sub);
    std::vector<uint8_t> ids;
    ids.reserve(idx.size());
    for (uint32_t i : idx) ids.push_back(static_cast<uint8_t>(i / per_channel));
    Bitstream bits;
    bits.bytes = pkt->payload;
    received[sub] = decode_packet(bits, ids, model);
    ++out.received_packets;
  }
  if (out.received_packets == 0) {
    out.values.assign(expect, 0);
    return out;
  }
  out.values = pmap.merge(received).values;
  return out;
}

size_t estimate_tensor_wire_bytes(const CodedTensor& t, size_t mtu) {
  auto model = LaplaceModel::fit(t.values, t.channels);
  size_t model_len = model.serialize().size();
  size_t max_payload = mtu - kFixedHeaderBytes - model_len;
  uint64_t payload = tensor_cost_q8(t.values, t.channels, model) / 256 / 8 + 1;
  auto n = std::max<uint64_t>(2, (payload + max_payload - 1) / max_payload);
  return payload + n * (kFixedHeaderBytes + model_len + 6);
}

}  // namespace detail

// --- SVC idealized quality oracle ----------------------------------------------

void SvcQualityOracle::put(uint32_t frame_id, Entry e) { entries_[frame_id] = std::move(e); }

Frame SvcQualityOracle::render(uint32_t frame_id, size_t usable_bytes) const {
  auto it = entries_.find(frame_id);
  if (it == entries_.end()) throw ValidationError("svc oracle: frame not registered");
  const Entry& e = it->second;

  int best = 0;
  for (int r = 0; r < kNumRungs; ++r) {
    if (e.rung_bytes[static_cast<size_t>(r)] <= usable_bytes) best = r;
  }
  EncodedFrame frame =
      e.frame.residual.rung == best
          ? e.frame
          : requantize_residual(e.frame, e.raw_residual_q8, QualityLevel::rung(best));
  return decode_frame_full(frame, e.has_reference ? &e.reference : nullptr);
}

void SvcQualityOracle::prune_before(uint32_t frame_id) {
  entries_.erase(entries_.begin(), entries_.lower_bound(frame_id));
}

// --- Sender ---------------------------------------------------------------------

Sender::Sender(TransportConfig config, VideoParams video,
               std::unique_ptr<RateController> controller,
               std::shared_ptr<SvcQualityOracle> svc_oracle)
    : config_(config),
      video_(video),
      controller_(std::move(controller)),
      svc_oracle_(std::move(svc_oracle)),
      fec_controller_(config.fec_floor, config.fec_cap) {
  if (!controller_) throw ValidationError("sender needs a rate controller");
  if (config_.scheme == Scheme::kSvc && !svc_oracle_) {
    svc_oracle_ = std::make_shared<SvcQualityOracle>();
  }
}

const Frame* Sender::optimistic_reference() const {
  if (!cache_.empty()) return &cache_.back().recon;
  if (anchor_recon_.has_value()) return &*anchor_recon_;
  return nullptr;
}

Sender::CacheEntry* Sender::find_cache(uint32_t frame_id) {
  for (auto& e : cache_) {
    if (e.frame_id == frame_id) return &e;
  }
  return nullptr;
}

int Sender::select_rung(const EncodeResult& er, const std::vector<int32_t>& patch_raw_q8,
                        size_t patch_blocks, size_t budget_bytes, bool* overshoot) const {
  *overshoot = false;
  size_t mv_bytes = er.frame.kind == FrameKind::kPredicted
                        ? detail::estimate_tensor_wire_bytes(er.frame.mv, static_cast<size_t>(config_.mtu))
                        : 0;

  auto bytes_at = [&](int r) -> size_t {
    auto q = QualityLevel::rung(r);
    uint16_t step = er.frame.residual.kind == TensorKind::kIntra ? q.intra_step_q8 : q.residual_step_q8;
    CodedTensor probe = er.frame.residual;
    probe.rung = static_cast<uint8_t>(r);
    probe.values = quantize_raw_q8(er.raw_residual_q8, step);
    size_t total = mv_bytes + detail::estimate_tensor_wire_bytes(probe, static_cast<size_t>(config_.mtu));
    if (!patch_raw_q8.empty()) {
      CodedTensor patch;
      patch.kind = TensorKind::kIntra;
      patch.channels = 64;
      patch.rows = static_cast<uint16_t>(patch_blocks);
      patch.cols = 1;
      patch.rung = static_cast<uint8_t>(r);
      patch.step_q8.assign(64, q.intra_step_q8);
      patch.values = quantize_raw_q8(patch_raw_q8, q.intra_step_q8);
      total += detail::estimate_tensor_wire_bytes(patch, static_cast<size_t>(config_.mtu));
    }
    return total;
  };

  for (int r = kNumRungs - 1; r >= 0; --r) {
    if (bytes_at(r) <= budget_bytes) return r;
  }
  *overshoot = true;
  return 0;
}

SenderOutput Sender::encode_tick(const Frame& source, int64_t now_us, SessionTimeline& timeline) {
  if (source.width != video_.width || source.height != video_.height ||
      source.mono != video_.mono) {
    throw ValidationError("sender: source dimensions differ from session parameters");
  }
  if (config_.scheme == Scheme::kShard) return encode_tick_shard(source, now_us, timeline);
  return encode_tick_mono(source, now_us, timeline);
}

SenderOutput Sender::encode_tick_shard(const Frame& source, int64_t now_us,
                                       SessionTimeline& timeline) {
  const uint32_t id = next_frame_id_++;
  int64_t target = controller_->target_bps(now_us);
  size_t budget = std::max<size_t>(1500, static_cast<size_t>(target / 8 / config_.fps));

  bool iframe = id == 0 || force_iframe_ ||
                (config_.iframe_interval > 0 && id % config_.iframe_interval == 0);
  const Frame* ref = optimistic_reference();
  if (ref == nullptr) iframe = true;
  force_iframe_ = false;

  Frame src = source;
  src.index = id;
  EncodeResult er = iframe ? encode_i(src, QualityLevel::rung(rung_guess_))
                           : encode_p(src, *ref, QualityLevel::rung(rung_guess_), config_.codec);

  std::vector<int32_t> patch_raw;
  size_t patch_blocks = 0;
  MbRect patch_rect;
  if (!iframe && config_.ipatch_k > 0) {
    auto region = ipatch_region(id, video_.width, video_.height, config_.ipatch_k);
    patch_rect = region.rect;
    patch_raw = intra_region_raw_q8(src, region.rect);
    patch_blocks = patch_raw.size() / 64;
  }

  bool overshoot = false;
  int rung = select_rung(er, patch_raw, patch_blocks, budget, &overshoot);
  EncodedFrame frame = er.frame.residual.rung == rung
                           ? er.frame
                           : requantize_residual(er.frame, er.raw_residual_q8, QualityLevel::rung(rung));
  if (!iframe && config_.ipatch_k > 0) {
    attach_ipatch(frame, src, config_.ipatch_k, QualityLevel::rung(rung));
  }

  // Packetize each tensor group under its own randomized map.
  CacheEntry entry;
  entry.frame_id = id;
  entry.encode_start_us = now_us;
  std::vector<std::pair<detail::ShardGroup, const CodedTensor*>> groups;
  if (!iframe) {
    groups.emplace_back(
        detail::make_shard_group(frame.mv, WireTensorKind::kMotion, static_cast<size_t>(config_.mtu)),
        &frame.mv);
  }
  groups.emplace_back(detail::make_shard_group(frame.residual,
                                               iframe ? WireTensorKind::kIntra : WireTensorKind::kResidual,
                                               static_cast<size_t>(config_.mtu)),
                      &frame.residual);
  if (frame.ipatch.has_value()) {
    groups.emplace_back(detail::make_shard_group(frame.ipatch->tensor, WireTensorKind::kIPatch,
                                                 static_cast<size_t>(config_.mtu), frame.ipatch->k),
                        &frame.ipatch->tensor);
  }

  uint16_t total_packets = 0;
  for (auto& [g, t] : groups) {
    g.descriptor.group_start = total_packets;
    total_packets = static_cast<uint16_t>(total_packets + g.map.n);
  }

  SenderOutput out;
  out.frame_id = id;
  size_t bytes_sent = 0;
  for (auto& [g, t] : groups) {
    for (uint16_t j = 0; j < g.map.n; ++j) {
      Packet p;
      p.header.scheme = Scheme::kShard;
      p.header.frame_id = id;
      p.header.is_predicted = !iframe;
      p.header.reference_offset = iframe ? 0 : 1;
      p.header.packet_index = static_cast<uint16_t>(g.descriptor.group_start + j);
      p.header.packet_count = total_packets;
      p.header.tensor = g.descriptor;
      p.header.map = g.map;
      p.header.model_bytes = g.model_bytes;
      p.payload = g.payloads[j];
      auto bytes = serialize_packet(p);
      bytes_sent += bytes.size();
      out.packets.push_back(std::move(bytes));
    }
    entry.groups.push_back({g.kind, g.descriptor.group_start, g.map.n, g.map.m, g.map.p});
  }

  auto& rec = timeline.frame(id);
  rec.is_predicted = !iframe;
  rec.rung = rung;
  rec.overshoot = overshoot;
  rec.encode_start_us = now_us;
  rec.packets_total = total_packets;
  rec.bytes_sent = static_cast<uint32_t>(bytes_sent);

  entry.recon = decode_frame_full(frame, iframe ? nullptr : ref);
  entry.recon.index = id;
  entry.frame = std::move(frame);
  entry.packets = out.packets;
  cache_.push_back(std::move(entry));
  while (cache_.size() > config_.cache_window) {
    // Un-acked evictions promote optimistically; a later incomplete report
    // for an evicted frame forces an I-frame instead of a resync.
    anchor_recon_ = std::move(cache_.front().recon);
    anchor_id_ = cache_.front().frame_id;
    cache_.pop_front();
  }
  rung_guess_ = rung;
  return out;
}

SenderOutput Sender::encode_tick_mono(const Frame& source, int64_t now_us,
                                      SessionTimeline& timeline) {
  const uint32_t id = next_frame_id_++;
  int64_t target = controller_->target_bps(now_us);
  size_t budget = std::max<size_t>(1500, static_cast<size_t>(target / 8 / config_.fps));

  double redundancy = 0.0;
  if (config_.scheme == Scheme::kFec) {
    redundancy = fec_controller_.redundancy(now_us);
    budget = static_cast<size_t>(static_cast<double>(budget) * (1.0 - redundancy));
  } else if (config_.scheme == Scheme::kSvc) {
    // base-layer parity at fixed 50%: parity bytes = 1/layers of the source
    budget = static_cast<size_t>(static_cast<double>(budget) * config_.svc_layers /
                                 (config_.svc_layers + 1));
  }

  bool iframe = id == 0 || force_iframe_ ||
                (config_.iframe_interval > 0 && id % config_.iframe_interval == 0);
  uint8_t ref_offset = 1;
  const Frame* ref = nullptr;
  if (!iframe) {
    uint32_t ref_id = id - 1;
    if (reference_recovery_ && have_complete_) ref_id = last_complete_id_;
    if (id - ref_id > 128 || (reference_recovery_ && !have_complete_)) {
      iframe = true;
    } else {
      CacheEntry* e = find_cache(ref_id);
      if (e != nullptr) {
        ref = &e->recon;
        ref_offset = static_cast<uint8_t>(id - ref_id);
      } else if (anchor_recon_.has_value() && anchor_id_ == ref_id) {
        ref = &*anchor_recon_;
        ref_offset = static_cast<uint8_t>(id - ref_id);
      } else {
        iframe = true;
      }
    }
  }
  reference_recovery_ = false;
  force_iframe_ = false;

  Frame src = source;
  src.index = id;
  EncodeResult er = iframe ? encode_i(src, QualityLevel::rung(rung_guess_))
                           : encode_p(src, *ref, QualityLevel::rung(rung_guess_), config_.codec);

  bool overshoot = false;
  int rung = select_rung(er, {}, 0, budget, &overshoot);
  EncodedFrame frame = er.frame.residual.rung == rung
                           ? er.frame
                           : requantize_residual(er.frame, er.raw_residual_q8, QualityLevel::rung(rung));

  auto blob = detail::encode_frame_blob(frame);
  size_t chunk = static_cast<size_t>(config_.mtu) - kFixedHeaderBytes;
  auto k = static_cast<uint16_t>((blob.size() + chunk - 1) / chunk);
  k = std::max<uint16_t>(k, 1);

  // layer byte ranges (single layer except for svc)
  int layers = config_.scheme == Scheme::kSvc ? config_.svc_layers : 1;
  std::vector<std::pair<size_t, size_t>> ranges;
  for (int l = 0; l < layers; ++l) {
    size_t lo = blob.size() * static_cast<size_t>(l) / static_cast<size_t>(layers);
    size_t hi = blob.size() * static_cast<size_t>(l + 1) / static_cast<size_t>(layers);
    ranges.emplace_back(lo, hi);
  }

  SenderOutput out;
  out.frame_id = id;
  CacheEntry entry;
  entry.frame_id = id;
  entry.encode_start_us = now_us;

  // Count packets first.
  struct LayerPlan {
    uint16_t k = 0;
    uint16_t r = 0;
    size_t lo = 0, hi = 0;
  };
  std::vector<LayerPlan> plan;
  uint16_t total_packets = 0;
  for (int l = 0; l < layers; ++l) {
    LayerPlan lp;
    lp.lo = ranges[static_cast<size_t>(l)].first;
    lp.hi = ranges[static_cast<size_t>(l)].second;
    size_t len = lp.hi - lp.lo;
    lp.k = static_cast<uint16_t>(std::max<size_t>(1, (len + chunk - 1) / chunk));
    if (config_.scheme == Scheme::kFec) {
      lp.r = static_cast<uint16_t>(FecRateController::parity_for(lp.k, redundancy));
    } else if (config_.scheme == Scheme::kSvc && l == 0) {
      lp.r = static_cast<uint16_t>(FecRateController::parity_for(lp.k, config_.svc_base_redundancy));
    }
    total_packets = static_cast<uint16_t>(total_packets + lp.k + lp.r);
    plan.push_back(lp);
  }

  size_t bytes_sent = 0;
  uint16_t index = 0;
  for (int l = 0; l < layers; ++l) {
    const LayerPlan& lp = plan[static_cast<size_t>(l)];
    size_t len = lp.hi - lp.lo;
    size_t layer_chunk = (len + lp.k - 1) / lp.k;
    layer_chunk = std::max<size_t>(layer_chunk, 1);

    std::vector<std::vector<uint8_t>> chunks(lp.k);
    for (uint16_t j = 0; j < lp.k; ++j) {
      size_t lo = lp.lo + static_cast<size_t>(j) * layer_chunk;
      size_t hi = std::min(lp.hi, lo + layer_chunk);
      if (lo < hi) chunks[j].assign(blob.begin() + static_cast<long>(lo), blob.begin() + static_cast<long>(hi));
    }
    std::vector<std::vector<uint8_t>> parity;
    if (lp.r > 0) {
      auto padded = chunks;
      for (auto& c : padded) c.resize(layer_chunk, 0);
      ReedSolomon rs(lp.k, lp.r);
      parity = rs.parity(padded);
    }

    uint16_t group_start = index;
    for (uint16_t j = 0; j < lp.k + lp.r; ++j) {
      Packet p;
      p.header.scheme = config_.scheme;
      p.header.frame_id = id;
      p.header.is_predicted = !iframe;
      p.header.reference_offset = iframe ? 0 : ref_offset;
      p.header.packet_index = index++;
      p.header.packet_count = total_packets;
      p.header.tensor.kind = WireTensorKind::kOpaque;
      p.header.tensor.rung = static_cast<uint8_t>(rung);
      p.header.tensor.channels = static_cast<uint8_t>(l);
      p.header.tensor.rows = 0;
      p.header.tensor.cols = 0;
      p.header.tensor.group_start = group_start;
      p.header.map.m = static_cast<uint32_t>(len);
      p.header.map.n = lp.k;
      p.header.map.p = lp.r;
      p.payload = j < lp.k ? chunks[j] : parity[static_cast<size_t>(j - lp.k)];
      auto bytes = serialize_packet(p);
      bytes_sent += bytes.size();
      out.packets.push_back(std::move(bytes));
    }
    entry.groups.push_back({WireTensorKind::kOpaque, group_start, static_cast<uint16_t>(lp.k + lp.r),
                            static_cast<uint32_t>(len), lp.r});
  }

  auto& rec = timeline.frame(id);
  rec.is_predicted = !iframe;
  rec.rung = rung;
  rec.overshoot = overshoot;
  rec.encode_start_us = now_us;
  rec.packets_total = total_packets;
  rec.bytes_sent = static_cast<uint32_t>(bytes_sent);

  entry.recon = decode_frame_full(frame, ref);
  entry.recon.index = id;
  entry.packets = out.packets;

  if (config_.scheme == Scheme::kSvc && svc_oracle_) {
    SvcQualityOracle::Entry oe;
    oe.raw_residual_q8 = er.raw_residual_q8;
    oe.has_reference = ref != nullptr;
    if (ref != nullptr) oe.reference = *ref;
    oe.rung_bytes.resize(kNumRungs);
    for (int r = 0; r < kNumRungs; ++r) {
      auto q = QualityLevel::rung(r);
      uint16_t step = frame.residual.kind == TensorKind::kIntra ? q.intra_step_q8 : q.residual_step_q8;
      CodedTensor probe = frame.residual;
      probe.rung = static_cast<uint8_t>(r);
      probe.values = quantize_raw_q8(er.raw_residual_q8, step);
      size_t est = detail::estimate_tensor_wire_bytes(probe, static_cast<size_t>(config_.mtu));
      if (!iframe) est += detail::estimate_tensor_wire_bytes(frame.mv, static_cast<size_t>(config_.mtu));
      oe.rung_bytes[static_cast<size_t>(r)] = est;
    }
    oe.rung_bytes[static_cast<size_t>(rung)] = bytes_sent;
    for (int r = 1; r < kNumRungs; ++r) {
      oe.rung_bytes[static_cast<size_t>(r)] =
          std::max(oe.rung_bytes[static_cast<size_t>(r)], oe.rung_bytes[static_cast<size_t>(r - 1)] + 1);
    }
    oe.frame = frame;
    svc_oracle_->put(id, std::move(oe));
  }

  entry.frame = std::move(frame);
  cache_.push_back(std::move(entry));
  while (cache_.size() > config_.cache_window) {
    anchor_recon_ = std::move(cache_.front().recon);
    anchor_id_ = cache_.front().frame_id;
    cache_.pop_front();
  }
  rung_guess_ = rung;
  return out;
}

void Sender::on_feedback(const Feedback& fb, int64_t now_us) {
  CacheEntry* entry = find_cache(fb.frame_id);

  // controller sample
  if (entry != nullptr && fb.decode_time_us > 0) {
    auto delay = static_cast<int64_t>(fb.decode_time_us) - entry->encode_start_us;
    controller_->on_frame_feedback(now_us, delay, !fb.complete());
  }
  double loss_fraction =
      fb.received.empty()
          ? 1.0
          : 1.0 - static_cast<double>(fb.received_count()) / static_cast<double>(fb.received.size());
  fec_controller_.observe(now_us, loss_fraction);

  if (config_.scheme == Scheme::kShard) {
    if (entry == nullptr) {
      if (!fb.complete()) force_iframe_ = true;  // divergence outside the cache window
      return;
    }
    if (!fb.complete()) {
      FrameMasks masks;
      if (fb.received.empty()) {
        masks.total_loss = true;
        masks.ipatch_present = false;
      } else {
        for (const auto& g : entry->groups) {
          bool any_lost = false;
          std::vector<std::optional<std::vector<int16_t>>> received(g.n);
          const CodedTensor& t = g.kind == WireTensorKind::kMotion
                                     ? entry->frame.mv
                                     : (g.kind == WireTensorKind::kIPatch ? entry->frame.ipatch->tensor
                                                                          : entry->frame.residual);
          PacketizationMap map(g.m, g.n, g.p);
          auto split = map.split(t.values);
          for (uint16_t j = 0; j < g.n; ++j) {
            if (fb.received[static_cast<size_t>(g.start + j)]) {
              received[j] = std::move(split[j]);
            } else {
              any_lost = true;
            }
          }
          if (g.kind == WireTensorKind::kIPatch) {
            masks.ipatch_present = !any_lost;
            continue;  // lost patches are skipped whole, not merged
          }
          if (!any_lost) continue;
          auto merged = map.merge(received);
          if (g.kind == WireTensorKind::kMotion) {
            masks.mv_values = std::move(merged.values);
          } else {
            masks.residual_values = std::move(merged.values);
          }
        }
      }
      entry->mask_known = true;
      entry->masks = std::move(masks);
      resync_from(fb.frame_id);
    }
    entry->complete_acked = true;
    while (!cache_.empty() && cache_.front().complete_acked) {
      anchor_recon_ = std::move(cache_.front().recon);
      anchor_id_ = cache_.front().frame_id;
      cache_.pop_front();
    }
    return;
  }

  // fec / svc / skip: mirror the receiver's decodability (bytes arrived and
  // the reference frame was itself decoded) to drive reference selection.
  if (entry == nullptr) {
    if (!fb.complete()) force_iframe_ = true;
    return;
  }
  bool bytes_ok;
  if (config_.scheme == Scheme::kSkip) {
    bytes_ok = fb.complete();
  } else {
    // decodable iff the (base) group survives its parity: any k of k+r
    const auto& g = entry->groups.front();
    uint32_t got = 0;
    for (uint16_t j = 0; j < g.n; ++j) {
      if (static_cast<size_t>(g.start) + j < fb.received.size() &&
          fb.received[static_cast<size_t>(g.start) + j]) {
        ++got;
      }
    }
    bytes_ok = got >= static_cast<uint32_t>(g.n - g.p);
  }
  bool ref_ok = entry->frame.kind == FrameKind::kIntra ||
                receiver_decoded_.count(entry->frame.reference_id) > 0;
  if (bytes_ok && ref_ok) {
    receiver_decoded_.insert(fb.frame_id);
    have_complete_ = true;
    last_complete_id_ = fb.frame_id;
  } else {
    reference_recovery_ = true;
  }
  while (!receiver_decoded_.empty() &&
         *receiver_decoded_.begin() + 512 < static_cast<uint64_t>(fb.frame_id)) {
    receiver_decoded_.erase(receiver_decoded_.begin());
  }
  entry->complete_acked = true;
  while (!cache_.empty() && cache_.front().complete_acked) {
    anchor_recon_ = std::move(cache_.front().recon);
    anchor_id_ = cache_.front().frame_id;
    cache_.pop_front();
  }
  if (config_.scheme == Scheme::kSvc && svc_oracle_) svc_oracle_->prune_before(fb.frame_id);
}

void Sender::resync_from(uint32_t frame_id) {
  // Replay the receiver's decodes over the cached window, starting from the
  // reconstruction of frame_id - 1.
  const Frame* prev = nullptr;
  if (anchor_recon_.has_value() && anchor_id_ + 1 == frame_id) {
    prev = &*anchor_recon_;
  } else {
    CacheEntry* before = find_cache(frame_id - 1);
    if (before != nullptr) prev = &before->recon;
  }
  if (prev == nullptr && find_cache(frame_id) != nullptr &&
      find_cache(frame_id)->frame.kind == FrameKind::kIntra) {
    // I-frames replay without a reference
  } else if (prev == nullptr) {
    force_iframe_ = true;
    return;
  }

  Frame ref = prev != nullptr ? *prev : Frame::make(video_.width, video_.height, video_.mono);
  bool started = false;
  for (auto& e : cache_) {
    if (e.frame_id < frame_id) continue;
    started = true;
    if (e.mask_known && e.masks.total_loss) {
      Frame copy = ref;
      copy.index = e.frame_id;
      e.recon = std::move(copy);
    } else {
      const FrameMasks& m = e.mask_known ? e.masks : FrameMasks{};
      const auto& mv = m.mv_values.empty() ? e.frame.mv.values : m.mv_values;
      const auto& res = m.residual_values.empty() ? e.frame.residual.values : m.residual_values;
      bool ipatch = e.mask_known ? m.ipatch_present : true;
      e.recon = decode_frame(e.frame, e.frame.kind == FrameKind::kPredicted ? &ref : nullptr, mv,
                             res, ipatch);
      e.recon.index = e.frame_id;
    }
    ref = e.recon;
  }
  (void)started;
}

std::vector<std::vector<uint8_t>> Sender::on_resend_request(uint32_t frame_id, int64_t) {
  CacheEntry* entry = find_cache(frame_id);
  if (entry == nullptr) return {};
  return entry->packets;
}

// --- Receiver -------------------------------------------------------------------

Receiver::Receiver(TransportConfig config, VideoParams video,
                   std::shared_ptr<SvcQualityOracle> svc_oracle)
    : config_(config), video_(video), svc_oracle_(std::move(svc_oracle)) {}

const Frame* Receiver::reconstruction(uint32_t frame_id) const {
  for (const auto& [id, f] : recons_) {
    if (id == frame_id) return &f;
  }
  return nullptr;
}

void Receiver::store_recon(uint32_t frame_id, Frame f) {
  recons_.emplace_back(frame_id, std::move(f));
  while (recons_.size() > 160) recons_.pop_front();
}

void Receiver::render_frame(uint32_t frame_id, const Frame& f, int64_t now_us,
                            SessionTimeline& timeline) {
  auto& rec = timeline.frame(frame_id);
  rec.decode_time_us = now_us;
  rec.rendered = true;
  if (render_) render_(frame_id, f, now_us);
}

ReceiverOutput Receiver::on_packet(const std::vector<uint8_t>& bytes, int64_t now_us,
                                   SessionTimeline& timeline) {
  Packet pkt;
  try {
    pkt = parse_packet(bytes);
  } catch (const ParseError&) {
    ++timeline.malformed_packets;
    return process(now_us, timeline, false);
  }
  uint32_t id = pkt.header.frame_id;
  if (id >= next_decode_id_) {
    Pending& p = pending_[id];
    if (p.first_arrival_us < 0) p.first_arrival_us = now_us;
    p.packet_count = pkt.header.packet_count;
    p.packets.emplace(pkt.header.packet_index, std::move(pkt));
  }
  return process(now_us, timeline, false);
}

ReceiverOutput Receiver::on_timer(int64_t now_us, SessionTimeline& timeline) {
  return process(now_us, timeline, false);
}

ReceiverOutput Receiver::flush(int64_t now_us, SessionTimeline& timeline) {
  return process(now_us, timeline, true);
}

int64_t Receiver::next_deadline_us() const {
  int64_t best = -1;
  for (const auto& [id, p] : pending_) {
    int64_t d = -1;
    if (p.hold_deadline_us >= 0) {
      d = p.hold_deadline_us;
    } else if (!p.packets.empty()) {
      d = p.first_arrival_us + config_.decode_timeout_us;
    }
    if (d >= 0 && (best < 0 || d < best)) best = d;
  }
  return best;
}

ReceiverOutput Receiver::process(int64_t now_us, SessionTimeline& timeline, bool flush_all) {
  ReceiverOutput out;
  for (;;) {
    if (pending_.empty()) break;
    uint32_t f = next_decode_id_;
    bool newer_has_packets = false;
    for (const auto& [id, p] : pending_) {
      if (id > f && !p.packets.empty()) {
        newer_has_packets = true;
        break;
      }
    }
    auto it = pending_.find(f);
    bool have_packets = it != pending_.end() && !it->second.packets.empty();

    if (have_packets) {
      Pending& p = it->second;
      bool timeout = now_us >= p.first_arrival_us + config_.decode_timeout_us;
      bool ready;
      if (p.hold_deadline_us >= 0) {
        // Frame under a resend hold: wait for the full resend or the deadline.
        ready = p.packets.size() >= p.packet_count || now_us >= p.hold_deadline_us || flush_all;
      } else {
        ready = newer_has_packets || timeout || flush_all;
      }
      if (!ready) break;
      decode_pending(f, p, now_us, timeline, out);
      pending_.erase(it);
      ++next_decode_id_;
      continue;
    }

    // No packets for f at all.
    if (!(newer_has_packets || flush_all ||
          (it != pending_.end() && it->second.hold_deadline_us >= 0))) {
      break;
    }
    Pending& p = pending_[f];  // may create
    if (!p.resend_requested && !flush_all) {
      p.resend_requested = true;
      p.hold_deadline_us = now_us + config_.decode_timeout_us;
      out.resend_requests.push_back(f);
      timeline.events.push_back({now_us, PacketEventType::kResendRequest, f, 0, 0});
      break;  // hold until the resend lands or the deadline passes
    }
    if (!flush_all && now_us < p.hold_deadline_us) break;

    // Abandon: freeze on the previous reconstruction, report total loss.
    auto& rec = timeline.frame(f);
    rec.undecodable = true;
    const Frame* prev = reconstruction(f - 1);
    if (prev != nullptr) {
      Frame copy = *prev;
      copy.index = f;
      store_recon(f, std::move(copy));
    }
    Feedback fb;
    fb.frame_id = f;
    fb.decode_time_us = static_cast<uint64_t>(now_us);
    out.feedback.push_back(std::move(fb));
    timeline.events.push_back({now_us, PacketEventType::kFeedback, f, 0, 0});
    pending_.erase(f);
    ++next_decode_id_;
  }
  return out;
}

void Receiver::decode_pending(uint32_t frame_id, Pending& p, int64_t now_us,
                              SessionTimeline& timeline, ReceiverOutput& out) {
  auto& rec = timeline.frame(frame_id);
  rec.packets_received = static_cast<uint32_t>(p.packets.size());

  if (config_.scheme == Scheme::kShard) {
    decode_shard(frame_id, p, now_us, timeline);
  } else {
    decode_mono(frame_id, p, now_us, timeline);
  }

  Feedback fb;
  fb.frame_id = frame_id;
  fb.received.assign(p.packet_count, false);
  for (const auto& [idx, pkt] : p.packets) {
    if (idx < fb.received.size()) fb.received[idx] = true;
  }
  fb.decode_time_us = static_cast<uint64_t>(now_us);
  out.feedback.push_back(std::move(fb));
  timeline.events.push_back({now_us, PacketEventType::kFeedback, frame_id, 0, 0});
}

void Receiver::decode_shard(uint32_t frame_id, Pending& p, int64_t now_us,
                            SessionTimeline& timeline) {
  // Group received packets by tensor group.
  struct Group {
    TensorDescriptor desc;
    MapParams map;
    const Packet* model_source = nullptr;
    std::map<uint16_t, const Packet*> by_sub;
  };
  std::map<uint16_t, Group> groups;
  bool predicted = false;
  uint8_t ref_offset = 1;
  for (const auto& [idx, pkt] : p.packets) {
    predicted = pkt.header.is_predicted;
    ref_offset = pkt.header.reference_offset;
    auto start = pkt.header.tensor.group_start;
    Group& g = groups[start];
    if (g.model_source == nullptr) {
      g.desc = pkt.header.tensor;
      g.map = pkt.header.map;
      g.model_source = &pkt;
    } else if (!(g.desc == pkt.header.tensor) || !(g.map == pkt.header.map)) {
      ++timeline.malformed_packets;
      continue;
    }
    g.by_sub[static_cast<uint16_t>(idx - start)] = &pkt;
  }

  auto& rec = timeline.frame(frame_id);
  size_t mbs = static_cast<size_t>(video_.width / kMacroblock) * (video_.height / kMacroblock);
  size_t blocks = static_cast<size_t>(video_.width / 8) * (video_.height / 8);
  if (!video_.mono) blocks += 2 * static_cast<size_t>(video_.width / 16) * (video_.height / 16);

  EncodedFrame frame;
  frame.frame_id = frame_id;
  frame.kind = predicted ? FrameKind::kPredicted : FrameKind::kIntra;
  frame.reference_id = predicted ? frame_id - ref_offset : 0;
  frame.width = video_.width;
  frame.height = video_.height;
  frame.mono = video_.mono;

  std::vector<int16_t> mv_values(2 * mbs, 0);
  std::vector<int16_t> residual_values(64 * blocks, 0);
  int residual_rung = 0;
  bool ipatch_present = false;

  for (auto& [start, g] : groups) {
    try {
      auto model = LaplaceModel::deserialize(g.model_source->header.model_bytes);
      auto merged = detail::merge_shard_group(g.desc, g.map, model, g.by_sub);
      switch (g.desc.kind) {
        case WireTensorKind::kMotion:
          if (merged.values.size() == mv_values.size()) mv_values = std::move(merged.values);
          break;
        case WireTensorKind::kResidual:
        case WireTensorKind::kIntra:
          if (merged.values.size() == residual_values.size()) {
            residual_values = std::move(merged.values);
            residual_rung = g.desc.rung;
          }
          break;
        case WireTensorKind::kIPatch: {
          if (merged.received_packets != merged.total_packets) break;  // unprotected: all-or-nothing
          auto region = ipatch_region(frame_id, video_.width, video_.height, g.desc.cols);
          IPatch patch;
          patch.region = region.rect;
          patch.k = static_cast<uint8_t>(region.k_effective);
          patch.tensor.kind = TensorKind::kIntra;
          patch.tensor.channels = 64;
          patch.tensor.rows = g.desc.rows;
          patch.tensor.cols = 1;
          patch.tensor.rung = g.desc.rung;
          patch.tensor.step_q8.assign(64, QualityLevel::rung(g.desc.rung).intra_step_q8);
          patch.tensor.values = std::move(merged.values);
          frame.ipatch = std::move(patch);
          ipatch_present = true;
          break;
        }
        case WireTensorKind::kOpaque:
          break;
      }
    } catch (const ParseError&) {
      ++timeline.malformed_packets;
    }
  }

  frame.mv.kind = TensorKind::kMotion;
  frame.mv.channels = 2;
  frame.mv.rows = static_cast<uint16_t>(video_.height / kMacroblock);
  frame.mv.cols = static_cast<uint16_t>(video_.width / kMacroblock);
  frame.mv.rung = static_cast<uint8_t>(residual_rung);
  frame.mv.step_q8.assign(2, kMvStepQ8);
  frame.residual.kind = predicted ? TensorKind::kResidual : TensorKind::kIntra;
  frame.residual.channels = 64;
  frame.residual.rows = static_cast<uint16_t>(blocks);
  frame.residual.cols = 1;
  frame.residual.rung = static_cast<uint8_t>(residual_rung);
  auto q = QualityLevel::rung(residual_rung);
  frame.residual.step_q8.assign(64, predicted ? q.residual_step_q8 : q.intra_step_q8);

  const Frame* ref = nullptr;
  if (predicted) {
    ref = reconstruction(frame.reference_id);
    if (ref == nullptr) {
      // Reference never materialized; freeze like a total loss.
      auto& frec = timeline.frame(frame_id);
      frec.undecodable = true;
      const Frame* prev = reconstruction(frame_id - 1);
      if (prev != nullptr) {
        Frame copy = *prev;
        copy.index = frame_id;
        store_recon(frame_id, std::move(copy));
      }
      return;
    }
  }
  frame.residual.values = residual_values;
  Frame decoded = decode_frame(frame, ref, mv_values, residual_values, ipatch_present);
  store_recon(frame_id, decoded);
  render_frame(frame_id, decoded, now_us, timeline);
  (void)rec;
}

void Receiver::decode_mono(uint32_t frame_id, Pending& p, int64_t now_us,
                           SessionTimeline& timeline) {
  struct Group {
    MapParams map;
    uint16_t start = 0;
    uint8_t layer = 0;
    uint8_t rung = 0;
    std::map<uint16_t, const Packet*> by_sub;
  };
  std::map<uint16_t, Group> groups;
  bool predicted = false;
  uint8_t ref_offset = 1;
  for (const auto& [idx, pkt] : p.packets) {
    predicted = pkt.header.is_predicted;
    ref_offset = pkt.header.reference_offset;
    Group& g = groups[pkt.header.tensor.group_start];
    g.map = pkt.header.map;
    g.start = pkt.header.tensor.group_start;
    g.layer = pkt.header.tensor.channels;
    g.rung = pkt.header.tensor.rung;
    g.by_sub[static_cast<uint16_t>(idx - g.start)] = &pkt;
  }

  auto& rec = timeline.frame(frame_id);

  // Recover each layer's byte range; layers are usable only as a prefix.
  std::vector<std::vector<uint8_t>> layer_bytes;
  size_t usable_bytes = 0;
  bool prefix_alive = true;
  size_t total_blob = 0;
  for (auto& [start, g] : groups) {
    total_blob += g.map.m;
    if (!prefix_alive) continue;
    uint16_t k = g.map.n;
    uint16_t r = g.map.p;
    size_t len = g.map.m;
    size_t chunk = (len + k - 1) / std::max<uint16_t>(k, 1);
    chunk = std::max<size_t>(chunk, 1);

    bool all_source = true;
    for (uint16_t j = 0; j < k; ++j) all_source &= g.by_sub.count(j) > 0;

    std::vector<uint8_t> bytes;
    if (all_source) {
      for (uint16_t j = 0; j < k; ++j) {
        const auto& pl = g.by_sub[j]->payload;
        bytes.insert(bytes.end(), pl.begin(), pl.end());
      }
      bytes.resize(len);
    } else if (g.by_sub.size() >= k && r > 0) {
      ReedSolomon rs(k, r);
      std::vector<std::optional<std::vector<uint8_t>>> shards(static_cast<size_t>(k) + r);
      for (const auto& [sub, pkt] : g.by_sub) {
        auto padded = pkt->payload;
        padded.resize(chunk, 0);
        shards[sub] = std::move(padded);
      }
      try {
        auto chunks = rs.reconstruct(shards);
        for (auto& c : chunks) bytes.insert(bytes.end(), c.begin(), c.end());
        bytes.resize(len);
      } catch (const ValidationError&) {
        prefix_alive = false;
        continue;
      }
    } else {
      prefix_alive = false;
      continue;
    }
    usable_bytes += bytes.size();
    layer_bytes.push_back(std::move(bytes));
  }

  bool base_ok = !layer_bytes.empty();
  if (!base_ok) {
    rec.undecodable = true;
    return;
  }

  if (config_.scheme == Scheme::kSvc) {
    if (svc_oracle_ == nullptr) throw ValidationError("svc receiver needs the quality oracle");
    Frame rendered = svc_oracle_->render(frame_id, usable_bytes);
    rendered.index = frame_id;
    render_frame(frame_id, rendered, now_us, timeline);
    return;
  }

  // fec / skip need the complete blob.
  if (usable_bytes < total_blob) {
    rec.undecodable = true;
    return;
  }
  std::vector<uint8_t> blob;
  for (auto& b : layer_bytes) blob.insert(blob.end(), b.begin(), b.end());

  try {
    EncodedFrame frame = detail::decode_frame_blob(blob, video_, frame_id, predicted, ref_offset);
    const Frame* ref = nullptr;
    if (predicted) {
      ref = reconstruction(frame.reference_id);
      if (ref == nullptr) {
        rec.undecodable = true;  // classic codec: no reference, no decode
        return;
      }
    }
    Frame decoded = decode_frame_full(frame, ref);
    store_recon(frame_id, decoded);
    render_frame(frame_id, decoded, now_us, timeline);
  } catch (const ParseError&) {
    rec.undecodable = true;
    ++timeline.malformed_packets;
  }
}

}  // namespace shardcast
