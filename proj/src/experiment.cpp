// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include <algorithm>
#include <cmath>

#include "shardcast/experiment.hpp"

namespace shardcast {

VideoSource VideoSource::synthetic(SyntheticSpec spec, uint32_t frame_count) {
  VideoSource s;
  s.synthetic_ = true;
  s.spec_ = spec;
  s.frame_count_ = frame_count;
  s.width_ = spec.width;
  s.height_ = spec.height;
  s.mono_ = spec.mono;
  return s;
}

VideoSource VideoSource::from_y4m(const std::string& path) {
  VideoSource s;
  s.synthetic_ = false;
  auto seq = load_y4m(path);
  if (seq.frames.empty()) throw ParseError(path + ": no frames");
  s.width_ = seq.width;
  s.height_ = seq.height;
  s.mono_ = seq.mono;
  s.frame_count_ = static_cast<uint32_t>(seq.frames.size());
  s.frames_ = std::move(seq.frames);
  return s;
}

Frame VideoSource::frame(uint32_t index) const {
  if (index >= frame_count_) throw ValidationError("source frame index out of range");
  if (synthetic_) return synth_frame(spec_, index);
  return frames_[index];
}

namespace {

// Control-channel message framing: one byte tag, then the message.
constexpr uint8_t kCtrlFeedback = 0;
constexpr uint8_t kCtrlResend = 1;

}  // namespace

SessionTimeline run_session(const VideoSource& source, const SimConfig& config) {
  SessionTimeline timeline;
  timeline.fps = config.transport.fps;
  switch (config.transport.scheme) {
    case Scheme::kShard: timeline.scheme = "shard"; break;
    case Scheme::kFec: timeline.scheme = "fec"; break;
    case Scheme::kSvc: timeline.scheme = "svc"; break;
    case Scheme::kSkip: timeline.scheme = "skip"; break;
  }

  EventQueue eq;
  Link link(eq, config.net);
  ControlChannel ctrl(eq, config.net.one_way_delay_us);

  auto oracle = std::make_shared<SvcQualityOracle>();
  auto controller = make_controller(config.controller, config.net.trace, config.initial_target_bps);
  Sender sender(config.transport, source.params(), std::move(controller),
                config.transport.scheme == Scheme::kSvc ? oracle : nullptr);
  Receiver receiver(config.transport, source.params(),
                    config.transport.scheme == Scheme::kSvc ? oracle : nullptr);

  int64_t interval = config.transport.frame_interval_us();
  auto total_frames = static_cast<uint32_t>(
      std::min<double>(source.frame_count(), config.duration_s * config.transport.fps));
  timeline.duration_us = static_cast<int64_t>(total_frames) * interval;

  receiver.set_render_callback([&](uint32_t frame_id, const Frame& f, int64_t) {
    if (frame_id >= total_frames) return;
    Frame src = source.frame(frame_id);
    auto& rec = timeline.frame(frame_id);
    rec.psnr_db = psnr(src, f);
    if (config.compute_ssim) {
      rec.ssim = ssim(src, f);
      rec.ssim_db = ssim_db(rec.ssim);
    }
  });

  // Receiver deadlines become timer events; stale ones are harmless.
  auto arm_receiver_timer = [&]() {
    int64_t deadline = receiver.next_deadline_us();
    if (deadline >= 0) {
      eq.schedule_at(deadline, [&, deadline]() {
        auto out = receiver.on_timer(eq.now(), timeline);
        for (auto& fb : out.feedback) {
          auto bytes = serialize_feedback(fb);
          bytes.insert(bytes.begin(), kCtrlFeedback);
          ctrl.send(std::move(bytes));
        }
        for (uint32_t id : out.resend_requests) {
          std::vector<uint8_t> bytes = {kCtrlResend,
                                        static_cast<uint8_t>(id >> 24),
                                        static_cast<uint8_t>((id >> 16) & 0xff),
                                        static_cast<uint8_t>((id >> 8) & 0xff),
                                        static_cast<uint8_t>(id & 0xff)};
          ctrl.send(std::move(bytes));
        }
      });
    }
  };

  link.set_event_sink([&](const PacketEvent& e) {
    timeline.events.push_back(e);
    auto& rec = timeline.frame(e.frame_id);
    if (e.type == PacketEventType::kSend) {
      ++timeline.packets_sent;
      if (rec.first_send_us < 0) rec.first_send_us = e.t_us;
      rec.last_send_us = std::max(rec.last_send_us, e.t_us);
    } else if (e.type == PacketEventType::kDrop) {
      ++timeline.packets_dropped;
    } else if (e.type == PacketEventType::kDeliver) {
      ++timeline.packets_delivered;
    }
  });

  link.set_deliver([&](std::vector<uint8_t> bytes) {
    auto out = receiver.on_packet(bytes, eq.now(), timeline);
    for (auto& fb : out.feedback) {
      auto b = serialize_feedback(fb);
      b.insert(b.begin(), kCtrlFeedback);
      ctrl.send(std::move(b));
    }
    for (uint32_t id : out.resend_requests) {
      std::vector<uint8_t> b = {kCtrlResend, static_cast<uint8_t>(id >> 24),
                                static_cast<uint8_t>((id >> 16) & 0xff),
                                static_cast<uint8_t>((id >> 8) & 0xff),
                                static_cast<uint8_t>(id & 0xff)};
      ctrl.send(std::move(b));
    }
    arm_receiver_timer();
  });

  ctrl.set_deliver([&](std::vector<uint8_t> bytes) {
    if (bytes.empty()) return;
    if (bytes[0] == kCtrlFeedback) {
      auto fb = parse_feedback(bytes.data() + 1, bytes.size() - 1);
      sender.on_feedback(fb, eq.now());
    } else if (bytes[0] == kCtrlResend && bytes.size() == 5) {
      uint32_t id = static_cast<uint32_t>(bytes[1]) << 24 | static_cast<uint32_t>(bytes[2]) << 16 |
                    static_cast<uint32_t>(bytes[3]) << 8 | bytes[4];
      auto packets = sender.on_resend_request(id, eq.now());
      for (auto& p : packets) {
        Packet parsed = parse_packet(p);
        link.send(std::move(p), parsed.header.frame_id, parsed.header.packet_index);
      }
    }
  });

  for (uint32_t i = 0; i < total_frames; ++i) {
    eq.schedule_at(static_cast<int64_t>(i) * interval, [&, i]() {
      Frame src = source.frame(i);
      auto out = sender.encode_tick(src, eq.now(), timeline);
      for (auto& p : out.packets) {
        Packet parsed = parse_packet(p);
        link.send(std::move(p), parsed.header.frame_id, parsed.header.packet_index);
      }
      arm_receiver_timer();
    });
  }

  // Let the tail drain: propagation, decode timeout, feedback.
  int64_t tail = timeline.duration_us + config.net.one_way_delay_us * 4 +
                 config.transport.decode_timeout_us * 3 + 1000000;
  eq.run_until(tail);
  auto out = receiver.flush(eq.now(), timeline);
  for (auto& fb : out.feedback) sender.on_feedback(fb, eq.now());

  std::sort(timeline.frames.begin(), timeline.frames.end(),
            [](const FrameRecord& a, const FrameRecord& b) { return a.frame_id < b.frame_id; });
  std::stable_sort(timeline.events.begin(), timeline.events.end(),
                   [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });
  return timeline;
}

// --- loss sweep ------------------------------------------------------------------

SweepResult run_loss_sweep(Scheme scheme, const VideoSource& source, uint32_t frames,
                           const SweepConfig& config) {
  for (double r : config.rates) {
    if (r < 0.0 || r > 0.9) throw ValidationError("loss sweep rates must lie in [0, 0.9]");
  }
  frames = std::min(frames, source.frame_count());
  if (frames == 0) throw ValidationError("loss sweep needs at least one frame");

  SweepResult result;
  switch (scheme) {
    case Scheme::kShard: result.scheme = "shard"; break;
    case Scheme::kFec: result.scheme = "fec"; break;
    case Scheme::kSvc: result.scheme = "svc"; break;
    case Scheme::kSkip: result.scheme = "skip"; break;
  }

  // Encode the chain once, at the budget matched across schemes. The FEC
  // family spends `fec_redundancy` of its budget on parity, so its source
  // rungs sit lower; that is the cliff-versus-graceful tradeoff under test.
  size_t budget = config.frame_budget_bytes;
  size_t source_budget = budget;
  double R = config.fec_redundancy;
  if (scheme == Scheme::kFec) {
    source_budget = static_cast<size_t>(static_cast<double>(budget) * (1.0 - R));
  } else if (scheme == Scheme::kSvc) {
    source_budget = static_cast<size_t>(static_cast<double>(budget) * 4.0 / 5.0);
  }

  struct CodedFrame {
    EncodedFrame frame;
    Frame recon;        // lossless reconstruction (reference chain)
    Frame source;
    std::vector<detail::ShardGroup> groups;  // shard scheme
    uint16_t packet_count = 0;
    uint16_t fec_k = 0;  // source packets (fec)
    size_t bytes = 0;
    std::vector<size_t> rung_bytes;  // svc
    std::vector<int32_t> raw_q8;     // svc
  };
  std::vector<CodedFrame> coded;
  coded.reserve(frames);

  const Frame* prev_recon = nullptr;
  for (uint32_t i = 0; i < frames; ++i) {
    CodedFrame cf;
    cf.source = source.frame(i);
    cf.source.index = i;
    bool iframe = i == 0;
    EncodeResult er;
    if (iframe) {
      er = encode_i(cf.source, QualityLevel::rung(kNumRungs - 1));
    } else {
      er = encode_p(cf.source, *prev_recon, QualityLevel::rung(kNumRungs - 1), config.codec);
    }
    // pick the highest rung fitting the per-frame source budget
    int rung = 0;
    bool found = false;
    size_t mv_bytes = iframe ? 0
                             : detail::estimate_tensor_wire_bytes(er.frame.mv,
                                                                  static_cast<size_t>(config.mtu));
    for (int r = kNumRungs - 1; r >= 0 && !found; --r) {
      auto q = QualityLevel::rung(r);
      uint16_t step = iframe ? q.intra_step_q8 : q.residual_step_q8;
      CodedTensor probe = er.frame.residual;
      probe.rung = static_cast<uint8_t>(r);
      probe.values = quantize_raw_q8(er.raw_residual_q8, step);
      if (mv_bytes + detail::estimate_tensor_wire_bytes(probe, static_cast<size_t>(config.mtu)) <=
          source_budget) {
        rung = r;
        found = true;
      }
    }
    cf.frame = er.frame.residual.rung == rung
                   ? er.frame
                   : requantize_residual(er.frame, er.raw_residual_q8, QualityLevel::rung(rung));
    if (!iframe && config.ipatch_k > 0 && scheme == Scheme::kShard) {
      attach_ipatch(cf.frame, cf.source, config.ipatch_k, QualityLevel::rung(rung));
    }

    if (scheme == Scheme::kShard) {
      if (!iframe) {
        cf.groups.push_back(detail::make_shard_group(cf.frame.mv, WireTensorKind::kMotion,
                                                     static_cast<size_t>(config.mtu)));
      }
      cf.groups.push_back(detail::make_shard_group(
          cf.frame.residual, iframe ? WireTensorKind::kIntra : WireTensorKind::kResidual,
          static_cast<size_t>(config.mtu)));
      if (cf.frame.ipatch.has_value()) {
        cf.groups.push_back(detail::make_shard_group(cf.frame.ipatch->tensor,
                                                     WireTensorKind::kIPatch,
                                                     static_cast<size_t>(config.mtu),
                                                     cf.frame.ipatch->k));
      }
      uint16_t start = 0;
      for (auto& g : cf.groups) {
        g.descriptor.group_start = start;
        start = static_cast<uint16_t>(start + g.map.n);
        for (const auto& pl : g.payloads) {
          cf.bytes += pl.size() + kFixedHeaderBytes + g.model_bytes.size();
        }
      }
      cf.packet_count = start;
    } else {
      auto blob = detail::encode_frame_blob(cf.frame);
      size_t chunk = static_cast<size_t>(config.mtu) - kFixedHeaderBytes;
      auto k = static_cast<uint16_t>(std::max<size_t>(1, (blob.size() + chunk - 1) / chunk));
      uint16_t r = 0;
      if (scheme == Scheme::kFec) r = static_cast<uint16_t>(FecRateController::parity_for(k, R));
      cf.fec_k = k;
      cf.packet_count = static_cast<uint16_t>(k + r);
      cf.bytes = blob.size() + static_cast<size_t>(cf.packet_count) * kFixedHeaderBytes +
                 static_cast<size_t>(r) * chunk;
      if (scheme == Scheme::kSvc) {
        cf.raw_q8 = er.raw_residual_q8;
        cf.rung_bytes.assign(kNumRungs, 0);
        for (int rr = 0; rr < kNumRungs; ++rr) {
          auto q = QualityLevel::rung(rr);
          uint16_t step = iframe ? q.intra_step_q8 : q.residual_step_q8;
          CodedTensor probe = cf.frame.residual;
          probe.rung = static_cast<uint8_t>(rr);
          probe.values = quantize_raw_q8(er.raw_residual_q8, step);
          cf.rung_bytes[static_cast<size_t>(rr)] =
              mv_bytes + detail::estimate_tensor_wire_bytes(probe, static_cast<size_t>(config.mtu));
        }
      }
    }

    cf.recon = decode_frame_full(cf.frame, iframe ? nullptr : prev_recon);
    cf.recon.index = i;
    coded.push_back(std::move(cf));
    prev_recon = &coded.back().recon;
  }

  Rng root(config.root_seed);
  for (double rate : config.rates) {
    SweepPoint point;
    point.rate = rate;
    double psnr_sum = 0, ssim_sum = 0;
    size_t rendered = 0, total = 0;

    for (int seed = 0; seed < config.seeds; ++seed) {
      for (uint32_t i = 0; i < frames; ++i) {
        ++total;
        const CodedFrame& cf = coded[i];
        Rng rng = root.child(static_cast<uint64_t>(rate * 1000) * 1000003 + seed, i);
        uint16_t n = cf.packet_count;
        auto lose = static_cast<uint32_t>(std::ceil(rate * n - 1e-9));
        std::vector<bool> lost(n, false);
        // partial Fisher-Yates over packet indices
        std::vector<uint16_t> order(n);
        for (uint16_t j = 0; j < n; ++j) order[j] = j;
        for (uint32_t j = 0; j < lose; ++j) {
          auto pick = j + rng.next_below(n - j);
          std::swap(order[j], order[pick]);
          lost[order[j]] = true;
        }

        const Frame* ref = i > 0 ? &coded[i - 1].recon : nullptr;
        if (scheme == Scheme::kShard) {
          if (lose >= n) continue;  // total loss: nothing rendered
          FrameMasks masks;
          bool ipatch_ok = true;
          for (const auto& g : cf.groups) {
            bool any_lost = false;
            for (uint16_t j = 0; j < g.map.n; ++j) {
              any_lost |= lost[static_cast<size_t>(g.descriptor.group_start + j)];
            }
            if (!any_lost) continue;
            if (g.kind == WireTensorKind::kIPatch) {
              ipatch_ok = false;
              continue;
            }
            const CodedTensor& t = g.kind == WireTensorKind::kMotion ? cf.frame.mv : cf.frame.residual;
            PacketizationMap map(g.map.m, g.map.n, g.map.p);
            auto split = map.split(t.values);
            std::vector<std::optional<std::vector<int16_t>>> received(g.map.n);
            bool any = false;
            for (uint16_t j = 0; j < g.map.n; ++j) {
              if (!lost[static_cast<size_t>(g.descriptor.group_start + j)]) {
                received[j] = std::move(split[j]);
                any = true;
              }
            }
            std::vector<int16_t> merged;
            if (any) {
              merged = map.merge(received).values;
            } else {
              merged.assign(t.values.size(), 0);
            }
            if (g.kind == WireTensorKind::kMotion) {
              masks.mv_values = std::move(merged);
            } else {
              masks.residual_values = std::move(merged);
            }
          }
          const auto& mv = masks.mv_values.empty() ? cf.frame.mv.values : masks.mv_values;
          const auto& res =
              masks.residual_values.empty() ? cf.frame.residual.values : masks.residual_values;
          Frame out = decode_frame(cf.frame, ref, mv, res, ipatch_ok);
          psnr_sum += psnr(cf.source, out);
          if (config.compute_ssim) ssim_sum += ssim_db(ssim(cf.source, out));
          ++rendered;
        } else if (scheme == Scheme::kFec) {
          uint32_t got = n - lose;
          if (got >= cf.fec_k) {
            psnr_sum += psnr(cf.source, cf.recon);
            if (config.compute_ssim) ssim_sum += ssim_db(ssim(cf.source, cf.recon));
            ++rendered;
          }
        } else if (scheme == Scheme::kSvc) {
          // equal byte split over 4 layers; base carries 50% redundancy in
          // the simulator, here the packet grid already reflects source only
          int layers = 4;
          uint32_t usable_layers = 0;
          for (int l = 0; l < layers; ++l) {
            size_t lo = static_cast<size_t>(n) * static_cast<size_t>(l) / static_cast<size_t>(layers);
            size_t hi = static_cast<size_t>(n) * static_cast<size_t>(l + 1) / static_cast<size_t>(layers);
            bool ok = true;
            for (size_t j = lo; j < hi; ++j) ok &= !lost[j];
            if (!ok) break;
            ++usable_layers;
          }
          if (usable_layers == 0) continue;
          size_t usable = cf.bytes * usable_layers / static_cast<size_t>(layers);
          int best = 0;
          for (int rr = 0; rr < kNumRungs; ++rr) {
            if (cf.rung_bytes[static_cast<size_t>(rr)] <= usable) best = rr;
          }
          EncodedFrame f = cf.frame.residual.rung == best
                               ? cf.frame
                               : requantize_residual(cf.frame, cf.raw_q8, QualityLevel::rung(best));
          Frame out = decode_frame_full(f, ref);
          psnr_sum += psnr(cf.source, out);
          if (config.compute_ssim) ssim_sum += ssim_db(ssim(cf.source, out));
          ++rendered;
        } else {  // skip
          if (lose > 0) continue;
          psnr_sum += psnr(cf.source, cf.recon);
          if (config.compute_ssim) ssim_sum += ssim_db(ssim(cf.source, cf.recon));
          ++rendered;
        }
      }
    }

    point.rendered_frac = total > 0 ? static_cast<double>(rendered) / static_cast<double>(total) : 0;
    point.undecodable = rendered == 0;
    if (rendered > 0) {
      point.mean_psnr_db = psnr_sum / static_cast<double>(rendered);
      point.mean_ssim_db = ssim_sum / static_cast<double>(rendered);
    }
    result.points.push_back(point);
  }
  return result;
}

}  // namespace shardcast
