#include "pb/pdp.hpp"

#include "pb/errors.hpp"
#include "pb/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace pb {

namespace {

double parse_double(std::string_view s, std::size_t row) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw LoadError("row " + std::to_string(row) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

// Splits CSV text into rows of two fields; row numbers are 1-based file lines.
std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> split_rows(std::string_view text) {
  std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw LoadError("row " + std::to_string(lineno) + ": expected two comma-separated fields");
    }
    rows.push_back({lineno, {line.substr(0, comma), line.substr(comma + 1)}});
  }
  return rows;
}

} // namespace

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 0) return out;
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double step = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + step * static_cast<double>(i);
  out.back() = b;
  return out;
}

double trapezoid(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size()) {
    throw StructureError("trapezoid: length mismatch");
  }
  double sum = 0;
  for (std::size_t i = 1; i < y.size(); ++i) sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return sum;
}

DistanceProfile DistanceProfile::from_values(std::vector<double> values) {
  DistanceProfile p;
  p.axis = linspace(0.0, 1.0, values.size());
  p.values = std::move(values);
  return p;
}

void DistanceProfile::validate() const {
  if (values.size() != axis.size()) {
    throw StructureError("profile values/axis length mismatch");
  }
  if (values.empty()) {
    throw StructureError("empty profile");
  }
  if (axis.front() != 0.0 || (axis.size() > 1 && axis.back() != 1.0)) {
    throw StructureError("profile axis must run from 0 to 1");
  }
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw StructureError("profile axis not strictly increasing at point " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw StructureError("non-finite profile value at point " + std::to_string(i));
    }
  }
}

void PdpConfig::validate() const {
  if (n_points < 2) {
    throw RangeError("n_points must be at least 2");
  }
}

DistanceProfile compute_profile(const FrameSequence &seq, const Frame &target,
                                const DistanceBackend &backend, std::size_t jobs) {
  if (seq.empty()) {
    throw StructureError("cannot profile an empty sequence");
  }
  std::vector<double> values(seq.size());
  parallel_for(seq.size(), jobs, [&](std::size_t i) {
    try {
      values[i] = backend.distance(seq[i], target);
    } catch (const Error &e) {
      throw Error("backend '" + backend.id() + "' failed at frame " + std::to_string(i) + ": " + e.what());
    }
    if (!std::isfinite(values[i]) || values[i] < 0) {
      throw NumericalError("backend '" + backend.id() + "' returned an invalid distance at frame " +
                           std::to_string(i));
    }
  });
  return DistanceProfile::from_values(std::move(values));
}

DistanceProfile normalize_profile(const DistanceProfile &p) {
  if (p.empty()) {
    throw StructureError("cannot normalize an empty profile");
  }
  const double end = p.values.back();
  const double start = p.values.front();
  double denominator = start - end;
  if (std::abs(denominator) < 1e-8) {
    denominator = 1.0;
  }
  DistanceProfile out = p;
  for (auto &v : out.values) v = (v - end) / denominator;
  return out;
}

DistanceProfile resample(const DistanceProfile &p, std::size_t n_points) {
  if (p.empty()) {
    throw StructureError("cannot resample an empty profile");
  }
  if (n_points < 2) {
    throw RangeError("n_points must be at least 2");
  }
  if (p.values.size() != p.axis.size()) {
    throw StructureError("profile values/axis length mismatch");
  }
  DistanceProfile out;
  out.axis = linspace(0.0, 1.0, n_points);
  out.values.resize(n_points);
  if (p.size() == 1) {
    std::fill(out.values.begin(), out.values.end(), p.values.front());
    return out;
  }
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t = out.axis[i];
    if (t <= p.axis.front()) {
      out.values[i] = p.values.front();
    } else if (t >= p.axis.back()) {
      out.values[i] = p.values.back();
    } else {
      const auto hi = static_cast<std::size_t>(std::upper_bound(p.axis.begin(), p.axis.end(), t) - p.axis.begin());
      const std::size_t lo = hi - 1;
      const double w = (t - p.axis[lo]) / (p.axis[hi] - p.axis[lo]);
      out.values[i] = p.values[lo] + w * (p.values[hi] - p.values[lo]);
    }
  }
  return out;
}

double curve_l2(const DistanceProfile &a, const DistanceProfile &b) {
  if (a.axis != b.axis) {
    throw StructureError("curves must share an axis");
  }
  std::vector<double> diff_sq(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b.values[i] - a.values[i];
    diff_sq[i] = d * d;
  }
  return std::sqrt(trapezoid(diff_sq, a.axis));
}

PdpResult pdp_from_profiles(const DistanceProfile &gt, const DistanceProfile &gen, const PdpConfig &cfg) {
  cfg.validate();
  if (gt.empty() || gen.empty()) {
    throw StructureError("pdp needs two nonempty profiles");
  }
  PdpResult r;
  r.profile_gt = gt;
  r.profile_gen = gen;
  r.final_distance = gen.values.back();

  const auto raw_gt = resample(gt, cfg.n_points);
  const auto raw_gen = resample(gen, cfg.n_points);
  r.pdp = curve_l2(raw_gt, raw_gen);

  const auto norm_gt = resample(normalize_profile(gt), cfg.n_points);
  const auto norm_gen = resample(normalize_profile(gen), cfg.n_points);
  r.pdp_norm = curve_l2(norm_gt, norm_gen);

  r.curve_gt = cfg.normalize ? norm_gt : raw_gt;
  r.curve_gen = cfg.normalize ? norm_gen : raw_gen;
  return r;
}

PdpResult pdp_score(const FrameSequence &gt, const FrameSequence &gen, const PdpConfig &cfg,
                    const DistanceBackend &backend, std::size_t jobs) {
  cfg.validate();
  if (gt.empty() || gen.empty()) {
    throw StructureError("pdp needs two nonempty sequences");
  }
  const Frame &target = gt.back();
  const auto profile_gt = compute_profile(gt, target, backend, jobs);
  const auto profile_gen = compute_profile(gen, target, backend, jobs);
  return pdp_from_profiles(profile_gt, profile_gen, cfg);
}

PdpResult pdp_score(const FrameSequence &gt, const FrameSequence &gen, const PdpConfig &cfg) {
  const auto backend = make_backend(cfg.distance_fn);
  return pdp_score(gt, gen, cfg, *backend);
}

DistanceProfile mean_profile(std::span<const DistanceProfile> profiles, std::size_t n_points) {
  if (profiles.empty()) {
    throw StructureError("mean of zero profiles");
  }
  DistanceProfile out = resample(profiles.front(), n_points);
  for (std::size_t k = 1; k < profiles.size(); ++k) {
    const auto r = resample(profiles[k], n_points);
    for (std::size_t i = 0; i < n_points; ++i) out.values[i] += r.values[i];
  }
  for (auto &v : out.values) v /= static_cast<double>(profiles.size());
  return out;
}

std::string format_profile_csv(const DistanceProfile &p) {
  std::string out = "t,value\n";
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.axis[i], p.values[i]);
    out += buf;
  }
  return out;
}

DistanceProfile parse_profile_csv(std::string_view text) {
  const auto rows = split_rows(text);
  DistanceProfile p;
  std::vector<std::size_t> lines;
  for (const auto &[lineno, fields] : rows) {
    if (lineno == rows.front().first && fields.first == "t" && fields.second == "value") continue;
    p.axis.push_back(parse_double(fields.first, lineno));
    p.values.push_back(parse_double(fields.second, lineno));
    lines.push_back(lineno);
    if (!std::isfinite(p.values.back())) {
      throw LoadError("row " + std::to_string(lineno) + ": non-finite value");
    }
    if (p.size() > 1 && !(p.axis[p.size() - 1] > p.axis[p.size() - 2])) {
      throw LoadError("row " + std::to_string(lineno) + ": time axis not strictly increasing");
    }
  }
  if (p.empty()) {
    throw LoadError("profile CSV has no data rows");
  }
  if (p.axis.front() != 0.0) {
    throw LoadError("row " + std::to_string(lines.front()) + ": time axis must start at 0");
  }
  if (p.size() > 1 && p.axis.back() != 1.0) {
    throw LoadError("row " + std::to_string(lines.back()) + ": time axis must end at 1");
  }
  return p;
}

DistanceProfile parse_score_csv(std::string_view text) {
  const auto rows = split_rows(text);
  std::map<long, double> by_index;
  for (const auto &[lineno, fields] : rows) {
    if (lineno == rows.front().first && fields.first == "index") continue;
    const double idx = parse_double(fields.first, lineno);
    if (idx < 0 || idx != std::floor(idx)) {
      throw LoadError("row " + std::to_string(lineno) + ": index must be a nonnegative integer");
    }
    const double d = parse_double(fields.second, lineno);
    if (!(d >= 0) || !std::isfinite(d)) {
      throw LoadError("row " + std::to_string(lineno) + ": distance must be finite and nonnegative");
    }
    if (!by_index.emplace(static_cast<long>(idx), d).second) {
      throw LoadError("row " + std::to_string(lineno) + ": duplicate index");
    }
  }
  if (by_index.empty()) {
    throw LoadError("score CSV has no data rows");
  }
  std::vector<double> values;
  long expect = 0;
  for (const auto &[idx, d] : by_index) {
    if (idx != expect++) {
      throw LoadError("score CSV is missing index " + std::to_string(expect - 1));
    }
    values.push_back(d);
  }
  return DistanceProfile::from_values(std::move(values));
}

} // namespace pb
