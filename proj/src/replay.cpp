#include "cabeval/replay.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "cabeval/format.hpp"

namespace cabeval {

void ReplayConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be positive");
}

LoggedStream generate_logged_stream(const RewardModel& model, std::int64_t length, Rng& rng) {
  if (length < 1) throw std::invalid_argument("stream length must be >= 1");
  LoggedStream stream;
  stream.range = model.range();
  stream.events.reserve(static_cast<std::size_t>(length));
  std::uniform_real_distribution<double> action(stream.range.lo, stream.range.hi);
  for (std::int64_t i = 0; i < length; ++i) {
    const double a = action(rng);
    stream.events.push_back({i, a, model.sample(a, rng)});
  }
  return stream;
}

double acceptance_probability(double delta, const ActionRange& range) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  return std::min(1.0, 2.0 * delta / range.width());
}

std::int64_t required_log_length(std::int64_t t_prime, double delta, const ActionRange& range) {
  if (t_prime < 1 || !(delta > 0.0)) {
    throw std::invalid_argument("required_log_length needs t_prime >= 1 and delta > 0");
  }
  const double exact = range.width() * static_cast<double>(t_prime) / (2.0 * delta);
  // Absorb rounding so exact quotients (2500.0000000000005) do not round up.
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(std::ceil(exact));
}

void save_stream(const LoggedStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "index,action,reward\n";
  for (const auto& ev : stream.events) {
    out << ev.index << ',' << format_double(ev.action) << ',' << format_double(ev.reward) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

template <class T>
bool parse_field(std::string_view text, T& value) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

LoggedStream load_stream(const std::filesystem::path& path, ActionRange range,
                         const std::function<void(const std::string&)>& warn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stream file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw StreamParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,action,reward") {
    throw StreamParseError(path.string() + ":1: expected header 'index,action,reward'");
  }

  LoggedStream stream;
  stream.range = range;
  std::int64_t line_no = 1;
  std::int64_t out_of_range = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::string_view view(line);
    const auto c1 = view.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : view.find(',', c1 + 1);
    if (c2 == std::string_view::npos || view.find(',', c2 + 1) != std::string_view::npos) {
      throw StreamParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 comma-separated fields");
    }
    LoggedEvent ev{};
    if (!parse_field(view.substr(0, c1), ev.index)) {
      throw StreamParseError(path.string() + ":" + std::to_string(line_no) + ": bad index");
    }
    if (!parse_field(view.substr(c1 + 1, c2 - c1 - 1), ev.action) || !std::isfinite(ev.action)) {
      throw StreamParseError(path.string() + ":" + std::to_string(line_no) + ": bad action");
    }
    if (!parse_field(view.substr(c2 + 1), ev.reward) || !std::isfinite(ev.reward)) {
      throw StreamParseError(path.string() + ":" + std::to_string(line_no) + ": bad reward");
    }
    if (!stream.events.empty() && ev.index <= stream.events.back().index) {
      throw StreamParseError(path.string() + ":" + std::to_string(line_no) +
                             ": index not strictly increasing");
    }
    if (!range.contains(ev.action)) ++out_of_range;
    stream.events.push_back(ev);
  }
  if (stream.events.empty()) throw StreamParseError(path.string() + ": stream has no events");
  if (out_of_range > 0 && warn) {
    warn(path.string() + ": " + std::to_string(out_of_range) + " action(s) outside [" +
         format_short(range.lo) + ", " + format_short(range.hi) + "] kept");
  }
  return stream;
}

}  // namespace cabeval
