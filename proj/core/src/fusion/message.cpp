#include "colloc/fusion/message.hpp"

#include "colloc/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>
#include <string>
#include <vector>

namespace colloc::fusion {

Mat3 EstimateMessage::covariance() const {
  const auto& u = p_upper;
  Mat3 P;
  P << u[0], u[1], u[2], u[1], u[3], u[4], u[2], u[4], u[5];
  return P;
}

std::array<double, 6> EstimateMessage::pack(const Mat3& P) {
  return {P(0, 0), P(0, 1), P(0, 2), P(1, 1), P(1, 2), P(2, 2)};
}

std::string format_message(const EstimateMessage& m) {
  std::string out = fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}", m.robot_id, m.object_id, m.send_time, m.x[0],
                                m.x[1], m.x[2]);
  for (double v : m.p_upper) out += fmt::format(",{:.17g}", v);
  out += fmt::format(",{}", m.frame_id);
  return out;
}

EstimateMessage parse_message(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() != 13) throw ConfigError(fmt::format("message: expected 13 fields, got {}", fields.size()));
  auto integer = [&](std::size_t i) {
    int v = 0;
    const auto& f = fields[i];
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || ptr != f.data() + f.size()) throw ConfigError(fmt::format("message: bad integer '{}'", f));
    return v;
  };
  auto real = [&](std::size_t i) {
    const auto& f = fields[i];
    char* end = nullptr;
    const double v = std::strtod(f.c_str(), &end);
    if (f.empty() || end != f.c_str() + f.size()) throw ConfigError(fmt::format("message: bad real '{}'", f));
    return v;
  };
  EstimateMessage m;
  m.robot_id = integer(0);
  m.object_id = integer(1);
  m.send_time = real(2);
  m.x = Vec3(real(3), real(4), real(5));
  for (std::size_t k = 0; k < 6; ++k) m.p_upper[k] = real(6 + k);
  m.frame_id = integer(12);
  return m;
}

}  // namespace colloc::fusion
