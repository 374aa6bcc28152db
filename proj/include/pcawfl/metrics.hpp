#pragma once

// Per-frame metric records and their CSV serialization. Doubles are written
// with 17 significant digits so a parse of the file reproduces the run
// bit for bit; a missing accuracy sample is an empty cell.

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcawfl::harness {

struct FrameRecord {
  long frame = 0;
  double grad_norm_sq = 0.0;
  double running_avg_grad_norm_sq = 0.0;
  double loss = 0.0;
  std::optional<double> test_accuracy;
  long channel_usages = 0;  // cumulative through this frame
  double empirical_G = 0.0; // running max of the gradient spread statistic
};

inline constexpr const char* kMetricsHeader =
    "frame,grad_norm_sq,running_avg_grad_norm_sq,loss,test_accuracy,"
    "channel_usages,empirical_G";

inline std::string format_double(double v) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void write_metrics_csv(const std::vector<FrameRecord>& records,
                              std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.frame << ',' << format_double(r.grad_norm_sq) << ','
        << format_double(r.running_avg_grad_norm_sq) << ','
        << format_double(r.loss) << ',';
    if (r.test_accuracy) out << format_double(*r.test_accuracy);
    out << ',' << r.channel_usages << ',' << format_double(r.empirical_G)
        << '\n';
  }
}

inline void write_metrics_csv(const std::vector<FrameRecord>& records,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
  write_metrics_csv(records, out);
  if (!out) throw std::runtime_error("metrics: write to '" + path + "' failed");
}

namespace detail {

inline double field_to_double(std::string_view field) {
  double out = 0.0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error("metrics: bad numeric field '" +
                             std::string(field) + "'");
  return out;
}

inline long field_to_long(std::string_view field) {
  long out = 0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error("metrics: bad integer field '" +
                             std::string(field) + "'");
  return out;
}

}  // namespace detail

inline std::vector<FrameRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("metrics: empty stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader)
    throw std::runtime_error("metrics: unexpected header '" + line + "'");

  std::vector<FrameRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const std::size_t comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 7)
      throw std::runtime_error("metrics: expected 7 fields, got " +
                               std::to_string(fields.size()));
    FrameRecord r;
    r.frame = detail::field_to_long(fields[0]);
    r.grad_norm_sq = detail::field_to_double(fields[1]);
    r.running_avg_grad_norm_sq = detail::field_to_double(fields[2]);
    r.loss = detail::field_to_double(fields[3]);
    if (!fields[4].empty()) r.test_accuracy = detail::field_to_double(fields[4]);
    r.channel_usages = detail::field_to_long(fields[5]);
    r.empirical_G = detail::field_to_double(fields[6]);
    records.push_back(r);
  }
  return records;
}

inline std::vector<FrameRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("metrics: cannot open '" + path + "'");
  return read_metrics_csv(in);
}

}  // namespace pcawfl::harness
