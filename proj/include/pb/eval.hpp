#pragma once

#include "pb/backends.hpp"
#include "pb/frame.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pb {

enum class AlignMode { Nearest, Monotone };

struct AlignmentResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches; // (gen_index, gt_index)
  std::vector<double> per_frame_distances;

  double total() const;
  double mean() const;
};

struct VideoScore {
  std::string metric_id;
  double value = 0.0;
  std::size_t frame_count = 0;
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t count = 0;
};

// Row-major table: table[g][t] = d(gen[g], gt[t]).
using DistanceTable = std::vector<std::vector<double>>;

DistanceTable distance_table(const FrameSequence &gen, const FrameSequence &gt,
                             const DistanceBackend &backend, std::size_t jobs = 1);

// Nearest: per-row argmin (ties to the lowest gt index). Monotone: minimum
// total cost with non-decreasing gt indices; among optimal assignments the
// lexicographically smallest is returned.
AlignmentResult align_table(const DistanceTable &table, AlignMode mode);

AlignmentResult align_frames(const FrameSequence &gen, const FrameSequence &gt,
                             const DistanceBackend &backend, AlignMode mode = AlignMode::Monotone,
                             std::size_t jobs = 1);

VideoScore score_video(const FrameSequence &gen, const FrameSequence &gt, const DistanceBackend &backend,
                       AlignMode mode = AlignMode::Monotone, std::size_t jobs = 1);

// Unweighted mean over videos; frame counts do not act as weights.
double aggregate(std::span<const VideoScore> scores);

GaussianStats gaussian_stats(const EmbeddingSet &es);
GaussianStats gaussian_stats(std::span<const EmbeddingSet> sets);

// Squared Frechet distance between Gaussians (FID convention).
double frechet_distance(const GaussianStats &a, const GaussianStats &b);

AlignMode parse_align_mode(const std::string &s);
std::string to_string(AlignMode mode);

} // namespace pb
