#include "colloc/sim/channel.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace colloc::sim {

LatencyChannel::LatencyChannel(RobotId sender, RobotId receiver, LatencySpec latency, double dt, std::uint64_t seed)
    : sender_(sender), receiver_(receiver), latency_(latency), dt_(dt), rng_(seed) {
  if (!(dt > 0.0)) throw ConfigError("channel: dt must be positive");
  if (latency.min < 0.0 || latency.max < latency.min) {
    throw ConfigError(fmt::format("channel {}->{}: invalid latency range {}..{}", sender, receiver, latency.min,
                                  latency.max));
  }
}

int LatencyChannel::send(int tick, std::vector<fusion::EstimateMessage> messages) {
  if (!queue_.empty() && tick < queue_.back().send_tick) {
    throw StateError(fmt::format("channel {}->{}: send at tick {} after tick {}", sender_, receiver_, tick,
                                 queue_.back().send_tick));
  }
  double delay = latency_.min;
  if (!latency_.fixed()) delay = std::uniform_real_distribution<double>(latency_.min, latency_.max)(rng_);
  const int ticks = static_cast<int>(std::lround(delay / dt_));
  const int due = std::max(tick + ticks, last_deliver_);
  last_deliver_ = due;
  queue_.push_back({tick, due, std::move(messages)});
  return due;
}

std::vector<Packet> LatencyChannel::deliver(int tick) {
  std::vector<Packet> out;
  while (!queue_.empty() && queue_.front().deliver_tick <= tick) {
    out.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  return out;
}

std::size_t LatencyChannel::in_flight_messages() const {
  std::size_t n = 0;
  for (const auto& p : queue_) n += p.messages.size();
  return n;
}

}  // namespace colloc::sim
