#pragma once

#include "colloc/sim/runner.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace colloc::sim {

/// CSV for one robot: tick, object, truth xyz, measured xyz, learned xyz,
/// fused xyz, trace P, trace P'. Reals are printed in shortest round-trip form.
void write_robot_csv(std::ostream& out, const RobotLog& log);
RobotLog read_robot_csv(std::istream& in, RobotId robot);

/// Channel log: send tick, deliver tick, receiver, then the message record.
void write_channel_csv(std::ostream& out, const std::vector<ChannelRecord>& records);
std::vector<ChannelRecord> read_channel_csv(std::istream& in);

/// Writes robot_<id>.csv per robot, channel.csv and run.txt into `dir`.
void save_run_log(const std::filesystem::path& dir, const RunLog& log);
RunLog load_run_log(const std::filesystem::path& dir);

}  // namespace colloc::sim
