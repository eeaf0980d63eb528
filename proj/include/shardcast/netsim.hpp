// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <vector>

#include "shardcast/frame.hpp"
#include "shardcast/timeline.hpp"
#include "shardcast/wire.hpp"

namespace shardcast {

struct NetConfig {
  int64_t one_way_delay_us = 100000;  // 100 ms
  int queue_capacity = 25;            // packets
  int mtu = kDefaultMtu;
  BandwidthTrace trace;
  double iid_loss = 0.0;  // optional random-drop knob, off by default
  uint64_t seed = 0;
};

// Deterministic discrete-event loop, microsecond clock. Events at equal
// times run in insertion order.
class EventQueue {
 public:
  using Handler = std::function<void()>;

  void schedule_at(int64_t t_us, Handler h);
  int64_t now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  // Runs the earliest event; returns false when none remain or the next
  // event is past t_end (clock then advances to t_end).
  bool step(int64_t t_end);
  void run_until(int64_t t_end) {
    while (step(t_end)) {
    }
  }

 private:
  struct Event {
    int64_t t;
    uint64_t seq;
    Handler fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.t > b.t || (a.t == b.t && a.seq > b.seq);
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  uint64_t next_seq_ = 0;
  int64_t now_ = 0;
};

// Single bottleneck: drop-tail queue in front of a token-bucket server whose
// rate follows the bandwidth trace (piecewise constant per 0.1 s cell,
// bucket depth two 0.1 s grants), then fixed propagation delay. Token
// arithmetic is exact: tokens are microbits, 1 bps = 1 microbit per
// microsecond.
class Link {
 public:
  using DeliverFn = std::function<void(std::vector<uint8_t>)>;
  using EventSink = std::function<void(const PacketEvent&)>;

  Link(EventQueue& eq, NetConfig config);

  void set_deliver(DeliverFn fn) { deliver_ = std::move(fn); }
  void set_event_sink(EventSink fn) { sink_ = std::move(fn); }

  // Enqueue for transmission; drops when the queue is full. Returns whether
  // the packet was accepted.
  bool send(std::vector<uint8_t> bytes, uint32_t frame_id, uint16_t packet_index);

  int queue_depth() const { return static_cast<int>(queue_.size()); }
  uint64_t accepted() const { return accepted_; }
  uint64_t dropped() const { return dropped_; }
  uint64_t delivered() const { return delivered_; }

 private:
  struct Queued {
    std::vector<uint8_t> bytes;
    uint32_t frame_id;
    uint16_t packet_index;
  };

  int64_t rate_at(int64_t t_us) const { return config_.trace.rate_at_us(t_us); }
  void advance_tokens(int64_t to_us);
  void pump();
  void schedule_pump(int64_t t_us);

  EventQueue& eq_;
  NetConfig config_;
  DeliverFn deliver_;
  EventSink sink_;
  Rng drop_rng_;
  std::deque<Queued> queue_;
  int64_t tokens_ubits_ = 0;
  int64_t tokens_time_us_ = 0;
  int64_t pump_scheduled_at_ = -1;
  uint64_t accepted_ = 0;
  uint64_t dropped_ = 0;
  uint64_t delivered_ = 0;
};

// Lossless fixed-delay control channel for feedback and resend requests.
class ControlChannel {
 public:
  using DeliverFn = std::function<void(std::vector<uint8_t>)>;
  ControlChannel(EventQueue& eq, int64_t delay_us) : eq_(eq), delay_us_(delay_us) {}
  void set_deliver(DeliverFn fn) { deliver_ = std::move(fn); }
  void send(std::vector<uint8_t> bytes);

 private:
  EventQueue& eq_;
  int64_t delay_us_;
  DeliverFn deliver_;
};

}  // namespace shardcast
