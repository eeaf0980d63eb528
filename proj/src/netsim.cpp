// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#include "shardcast/netsim.hpp"

namespace shardcast {

void EventQueue::schedule_at(int64_t t_us, Handler h) {
  if (t_us < now_) t_us = now_;
  heap_.push(Event{t_us, next_seq_++, std::move(h)});
}

bool EventQueue::step(int64_t t_end) {
  if (heap_.empty() || heap_.top().t > t_end) {
    if (now_ < t_end) now_ = t_end;
    return false;
  }
  // top() only exposes const access; the handler is moved out via const_cast
  // before pop, which is safe because the heap order ignores fn.
  auto& top = const_cast<Event&>(heap_.top());
  int64_t t = top.t;
  Handler fn = std::move(top.fn);
  heap_.pop();
  now_ = t;
  fn();
  return true;
}

namespace {
constexpr int64_t kCellUs = BandwidthTrace::kGridUs;  // 0.1 s rate cells

inline int64_t cell_end(int64_t t_us) { return (t_us / kCellUs + 1) * kCellUs; }
inline int64_t need_ubits(size_t bytes) { return static_cast<int64_t>(bytes) * 8 * 1000000; }
}  // namespace

Link::Link(EventQueue& eq, NetConfig config)
    : eq_(eq), config_(std::move(config)), drop_rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {}

bool Link::send(std::vector<uint8_t> bytes, uint32_t frame_id, uint16_t packet_index) {
  int64_t now = eq_.now();
  auto size = static_cast<uint32_t>(bytes.size());
  if (sink_) sink_({now, PacketEventType::kSend, frame_id, packet_index, size});
  if (static_cast<int>(queue_.size()) >= config_.queue_capacity) {
    ++dropped_;
    if (sink_) sink_({now, PacketEventType::kDrop, frame_id, packet_index, size});
    return false;
  }
  ++accepted_;
  queue_.push_back(Queued{std::move(bytes), frame_id, packet_index});
  pump();
  return true;
}

void Link::advance_tokens(int64_t to_us) {
  while (tokens_time_us_ < to_us) {
    int64_t rate = rate_at(tokens_time_us_);
    int64_t seg_end = std::min(cell_end(tokens_time_us_), to_us);
    tokens_ubits_ += rate * (seg_end - tokens_time_us_);
    int64_t cap = 2 * rate * kCellUs;  // bucket depth: two 0.1 s grants
    if (tokens_ubits_ > cap) tokens_ubits_ = cap;
    tokens_time_us_ = seg_end;
  }
}

void Link::pump() {
  int64_t now = eq_.now();
  advance_tokens(now);

  while (!queue_.empty()) {
    int64_t need = need_ubits(queue_.front().bytes.size());
    if (tokens_ubits_ < need) break;
    tokens_ubits_ -= need;
    Queued q = std::move(queue_.front());
    queue_.pop_front();

    bool lost = config_.iid_loss > 0.0 && drop_rng_.next_unit() < config_.iid_loss;
    auto size = static_cast<uint32_t>(q.bytes.size());
    if (lost) {
      ++dropped_;
      if (sink_) sink_({now, PacketEventType::kDrop, q.frame_id, q.packet_index, size});
      continue;
    }
    ++delivered_;
    if (sink_) {
      sink_({now + config_.one_way_delay_us, PacketEventType::kDeliver, q.frame_id, q.packet_index,
             size});
    }
    eq_.schedule_at(now + config_.one_way_delay_us,
                    [this, bytes = std::move(q.bytes)]() mutable {
                      if (deliver_) deliver_(std::move(bytes));
                    });
  }

  if (queue_.empty()) return;

  // Tokens are short; walk the rate cells to find when the head packet's
  // tokens arrive. Past the trace end the rate holds its last value, so a
  // zero or too-small tail rate means the packet never departs.
  int64_t need = need_ubits(queue_.front().bytes.size());
  int64_t trace_end = config_.trace.duration_us();
  int64_t t = now;
  int64_t tok = tokens_ubits_;
  for (;;) {
    int64_t rate = rate_at(t);
    int64_t seg_end = cell_end(t);
    if (rate > 0) {
      int64_t cap = 2 * rate * kCellUs;
      if (t >= trace_end && cap < need) return;  // bucket shallower than the packet
      int64_t dt = (need - tok + rate - 1) / rate;
      if (t + dt <= seg_end || t >= trace_end) {
        schedule_pump(t + dt);
        return;
      }
      tok += rate * (seg_end - t);
      if (tok > cap) tok = cap;
    } else if (t >= trace_end) {
      return;  // zero tail rate
    }
    t = seg_end;
  }
}

void Link::schedule_pump(int64_t t_us) {
  if (pump_scheduled_at_ >= 0 && pump_scheduled_at_ <= t_us) return;
  pump_scheduled_at_ = t_us;
  eq_.schedule_at(t_us, [this, t_us]() {
    if (pump_scheduled_at_ == t_us) pump_scheduled_at_ = -1;
    pump();
  });
}

void ControlChannel::send(std::vector<uint8_t> bytes) {
  eq_.schedule_at(eq_.now() + delay_us_, [this, b = std::move(bytes)]() mutable {
    if (deliver_) deliver_(std::move(b));
  });
}

FrameRecord& SessionTimeline::frame(uint32_t frame_id) {
  for (auto& f : frames) {
    if (f.frame_id == frame_id) return f;
  }
  frames.emplace_back();
  frames.back().frame_id = frame_id;
  return frames.back();
}

const char* to_string(PacketEventType t) {
  switch (t) {
    case PacketEventType::kSend: return "send";
    case PacketEventType::kDrop: return "drop";
    case PacketEventType::kDeliver: return "deliver";
    case PacketEventType::kFeedback: return "feedback";
    case PacketEventType::kResendRequest: return "resend_request";
  }
  return "?";
}

void SessionTimeline::write_events_jsonl(std::ostream& out) const {
  for (const auto& e : events) {
    out << "{\"t_us\":" << e.t_us << ",\"type\":\"" << to_string(e.type)
        << "\",\"frame_id\":" << e.frame_id << ",\"packet_index\":" << e.packet_index
        << ",\"size\":" << e.size_bytes << "}\n";
  }
}

void SessionTimeline::write_frames_csv(std::ostream& out) const {
  out << "frame_id,kind,rung,overshoot,encode_start_us,first_send_us,last_send_us,"
         "packets_total,packets_received,bytes_sent,decode_time_us,rendered,undecodable,"
         "psnr_db,ssim,ssim_db\n";
  for (const auto& f : frames) {
    out << f.frame_id << "," << (f.is_predicted ? "P" : "I") << "," << f.rung << ","
        << (f.overshoot ? 1 : 0) << "," << f.encode_start_us << "," << f.first_send_us << ","
        << f.last_send_us << "," << f.packets_total << "," << f.packets_received << ","
        << f.bytes_sent << "," << f.decode_time_us << "," << (f.rendered ? 1 : 0) << ","
        << (f.undecodable ? 1 : 0) << "," << f.psnr_db << "," << f.ssim << "," << f.ssim_db
        << "\n";
  }
}

}  // namespace shardcast
