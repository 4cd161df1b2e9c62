#pragma once

#include "pb/backends.hpp"
#include "pb/frame.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pb {

// Evenly spaced values from a to b inclusive; the last entry is exactly b.
// n == 1 yields {a}.
std::vector<double> linspace(double a, double b, std::size_t n);

// Trapezoidal integral of y over the abscissae x.
double trapezoid(std::span<const double> y, std::span<const double> x);

// Per-frame distance to a target frame, over normalized time.
struct DistanceProfile {
  std::vector<double> values;
  std::vector<double> axis;

  // Axis linspace(0, 1, values.size()); a single value gets axis {0}.
  static DistanceProfile from_values(std::vector<double> values);

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  // Throws StructureError if lengths differ, the axis is not strictly
  // increasing from 0 to 1, or a value is not finite.
  void validate() const;
};

struct PdpConfig {
  std::size_t n_points = 200;
  bool normalize = false;
  std::string distance_fn = "mse";

  void validate() const;
};

struct PdpResult {
  double pdp = 0.0;            // on raw profiles
  double pdp_norm = 0.0;       // on profiles remapped to run from 1 to 0
  double final_distance = 0.0; // raw distance of the last generated frame to the target
  DistanceProfile profile_gt;  // raw, before resampling
  DistanceProfile profile_gen;
  // Resampled curves on the common axis; normalized iff the config asked for it.
  DistanceProfile curve_gt;
  DistanceProfile curve_gen;

  double score(bool normalized) const { return normalized ? pdp_norm : pdp; }
};

DistanceProfile compute_profile(const FrameSequence &seq, const Frame &target,
                                const DistanceBackend &backend, std::size_t jobs = 1);

// (P - P_end) / (P_start - P_end), with the denominator replaced by 1 when its
// magnitude is below 1e-8.
DistanceProfile normalize_profile(const DistanceProfile &p);

// Piecewise-linear resampling onto linspace(0, 1, n_points).
DistanceProfile resample(const DistanceProfile &p, std::size_t n_points);

// L2 distance between two curves sharing an axis (trapezoidal rule).
double curve_l2(const DistanceProfile &a, const DistanceProfile &b);

// Scores two raw profiles that were measured against the same target.
PdpResult pdp_from_profiles(const DistanceProfile &gt, const DistanceProfile &gen, const PdpConfig &cfg);

// Both profiles are measured against the last frame of `gt`.
PdpResult pdp_score(const FrameSequence &gt, const FrameSequence &gen, const PdpConfig &cfg,
                    const DistanceBackend &backend, std::size_t jobs = 1);
PdpResult pdp_score(const FrameSequence &gt, const FrameSequence &gen, const PdpConfig &cfg);

DistanceProfile mean_profile(std::span<const DistanceProfile> profiles, std::size_t n_points);

// CSV with header `t,value`, one row per point, 17 significant digits.
std::string format_profile_csv(const DistanceProfile &p);
DistanceProfile parse_profile_csv(std::string_view text);

// Pre-scored per-frame distances: CSV rows `index,distance` (optional header).
// Indices must cover 0..n-1 exactly once.
DistanceProfile parse_score_csv(std::string_view text);

} // namespace pb
