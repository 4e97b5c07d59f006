#pragma once

#include "colloc/fusion/message.hpp"
#include "colloc/sim/scenario.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

namespace colloc::sim {

/// Messages broadcast by one robot in one tick; they travel together.
struct Packet {
  int send_tick = 0;
  int deliver_tick = 0;
  std::vector<fusion::EstimateMessage> messages;

  /// Delay actually experienced, in ticks.
  int delay_ticks() const { return deliver_tick - send_tick; }
};

/// One-way link from `sender` to `receiver`. Each packet's delay is drawn from
/// the latency spec and rounded to whole ticks; delivery is FIFO, so a packet
/// never overtakes an earlier one.
class LatencyChannel {
 public:
  LatencyChannel(RobotId sender, RobotId receiver, LatencySpec latency, double dt, std::uint64_t seed);

  /// Queues a packet sent at `tick`; returns its deliver-at tick.
  int send(int tick, std::vector<fusion::EstimateMessage> messages);
  /// Removes and returns every packet due at or before `tick`, in send order.
  std::vector<Packet> deliver(int tick);

  std::size_t in_flight() const { return queue_.size(); }
  std::size_t in_flight_messages() const;
  RobotId sender() const { return sender_; }
  RobotId receiver() const { return receiver_; }
  const LatencySpec& latency() const { return latency_; }

 private:
  RobotId sender_;
  RobotId receiver_;
  LatencySpec latency_;
  double dt_;
  std::mt19937_64 rng_;
  std::deque<Packet> queue_;
  int last_deliver_ = 0;
};

}  // namespace colloc::sim
