#include "colloc/sim/run_log.hpp"

#include "colloc/error.hpp"
#include "colloc/io.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace colloc::sim {

namespace {

constexpr const char* kRobotHeader =
    "tick,object,truth_x,truth_y,truth_z,measured_x,measured_y,measured_z,learned_x,learned_y,learned_z,"
    "fused_x,fused_y,fused_z,trace_p,trace_fused";
constexpr const char* kChannelHeader =
    "send_tick,deliver_tick,receiver,robot,object,send_time,x,y,z,p00,p01,p02,p11,p12,p22,frame";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double to_real(const std::string& s, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(fmt::format("run log line {}: bad number '{}'", line, s));
  return v;
}

int to_int(const std::string& s, int line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw Error(fmt::format("run log line {}: bad integer '{}'", line, s));
  return static_cast<int>(v);
}

void put(std::ostream& out, const Vec3& v) { out << fmt::format(",{},{},{}", v.x(), v.y(), v.z()); }

Vec3 get(const std::vector<std::string>& f, std::size_t at, int line) {
  return {to_real(f[at], line), to_real(f[at + 1], line), to_real(f[at + 2], line)};
}

}  // namespace

void write_robot_csv(std::ostream& out, const RobotLog& log) {
  out << kRobotHeader << '\n';
  for (const auto& r : log.rows) {
    out << r.tick << ',' << r.object;
    put(out, r.truth);
    put(out, r.measured);
    put(out, r.learned);
    put(out, r.fused);
    out << fmt::format(",{},{}\n", r.trace_p, r.trace_fused);
  }
}

RobotLog read_robot_csv(std::istream& in, RobotId robot) {
  RobotLog log{robot, {}};
  std::string line;
  if (!std::getline(in, line) || line != kRobotHeader) throw Error("robot log: missing or unexpected header");
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 16) throw Error(fmt::format("robot log line {}: expected 16 fields, got {}", n, f.size()));
    LogRow r;
    r.tick = to_int(f[0], n);
    r.object = to_int(f[1], n);
    r.truth = get(f, 2, n);
    r.measured = get(f, 5, n);
    r.learned = get(f, 8, n);
    r.fused = get(f, 11, n);
    r.trace_p = to_real(f[14], n);
    r.trace_fused = to_real(f[15], n);
    log.rows.push_back(r);
  }
  return log;
}

void write_channel_csv(std::ostream& out, const std::vector<ChannelRecord>& records) {
  out << kChannelHeader << '\n';
  for (const auto& r : records) {
    out << r.send_tick << ',' << r.deliver_tick << ',' << r.receiver << ',' << fusion::format_message(r.message)
        << '\n';
  }
}

std::vector<ChannelRecord> read_channel_csv(std::istream& in) {
  std::vector<ChannelRecord> out;
  std::string line;
  if (!std::getline(in, line) || line != kChannelHeader) throw Error("channel log: missing or unexpected header");
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::size_t pos = 0;
    int fields[3];
    for (int& v : fields) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) throw Error(fmt::format("channel log line {}: truncated record", n));
      v = to_int(line.substr(pos, comma - pos), n);
      pos = comma + 1;
    }
    out.push_back({fields[0], fields[1], fields[2], fusion::parse_message(std::string_view(line).substr(pos))});
  }
  return out;
}

void save_run_log(const std::filesystem::path& dir, const RunLog& log) {
  std::filesystem::create_directories(dir);
  for (const auto& r : log.robots) {
    write_file_atomic(dir / fmt::format("robot_{}.csv", r.robot), [&](std::ostream& out) { write_robot_csv(out, r); });
  }
  write_file_atomic(dir / "channel.csv", [&](std::ostream& out) { write_channel_csv(out, log.channel); });
  write_file_atomic(dir / "run.txt", [&](std::ostream& out) {
    out << "mode " << to_string(log.mode) << '\n';
    out << fmt::format("dt {}\n", log.dt);
    out << "robots";
    for (const auto& r : log.robots) out << ' ' << r.robot;
    out << '\n';
    out << "messages_sent " << log.messages_sent << '\n';
    out << "messages_undelivered " << log.messages_undelivered << '\n';
  });
}

RunLog load_run_log(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "run.txt");
  if (!meta) throw Error(fmt::format("run log: cannot open {}", (dir / "run.txt").string()));
  RunLog log;
  std::vector<RobotId> ids;
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "mode") {
      std::string name;
      ss >> name;
      auto mode = parse_pipeline_mode(name);
      if (!mode) throw Error(fmt::format("run log: unknown mode '{}'", name));
      log.mode = *mode;
    } else if (key == "dt") {
      ss >> log.dt;
    } else if (key == "robots") {
      for (RobotId id; ss >> id;) ids.push_back(id);
    } else if (key == "messages_sent") {
      ss >> log.messages_sent;
    } else if (key == "messages_undelivered") {
      ss >> log.messages_undelivered;
    }
  }
  for (RobotId id : ids) {
    std::ifstream in(dir / fmt::format("robot_{}.csv", id));
    if (!in) throw Error(fmt::format("run log: missing robot_{}.csv", id));
    log.robots.push_back(read_robot_csv(in, id));
  }
  std::ifstream channel(dir / "channel.csv");
  if (channel) log.channel = read_channel_csv(channel);
  return log;
}

}  // namespace colloc::sim
