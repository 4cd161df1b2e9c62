#include "pb/eval.hpp"

#include "pb/errors.hpp"
#include "pb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pb {

double AlignmentResult::total() const {
  return std::accumulate(per_frame_distances.begin(), per_frame_distances.end(), 0.0);
}

double AlignmentResult::mean() const {
  return per_frame_distances.empty() ? 0.0 : total() / static_cast<double>(per_frame_distances.size());
}

DistanceTable distance_table(const FrameSequence &gen, const FrameSequence &gt,
                             const DistanceBackend &backend, std::size_t jobs) {
  if (gen.empty() || gt.empty()) {
    throw StructureError("alignment needs two nonempty sequences");
  }
  DistanceTable table(gen.size(), std::vector<double>(gt.size()));
  parallel_for(gen.size() * gt.size(), jobs, [&](std::size_t k) {
    const std::size_t g = k / gt.size(), t = k % gt.size();
    try {
      table[g][t] = backend.distance(gen[g], gt[t]);
    } catch (const Error &e) {
      throw Error("backend '" + backend.id() + "' failed at generated frame " + std::to_string(g) +
                  ", ground-truth frame " + std::to_string(t) + ": " + e.what());
    }
  });
  return table;
}

AlignmentResult align_table(const DistanceTable &table, AlignMode mode) {
  if (table.empty() || table.front().empty()) {
    throw StructureError("empty distance table");
  }
  const std::size_t rows = table.size(), cols = table.front().size();
  for (const auto &row : table) {
    if (row.size() != cols) throw StructureError("ragged distance table");
  }
  AlignmentResult r;
  r.matches.reserve(rows);
  r.per_frame_distances.reserve(rows);

  if (mode == AlignMode::Nearest) {
    for (std::size_t g = 0; g < rows; ++g) {
      const auto it = std::min_element(table[g].begin(), table[g].end());
      const auto t = static_cast<std::size_t>(it - table[g].begin());
      r.matches.emplace_back(g, t);
      r.per_frame_distances.push_back(*it);
    }
    return r;
  }

  // suffix[g][t]: minimal cost of rows g..end given row g takes column t.
  // Computing from the back lets the forward walk pick the smallest column
  // at each step among optimal continuations.
  DistanceTable suffix(rows, std::vector<double>(cols));
  suffix[rows - 1] = table[rows - 1];
  for (std::size_t g = rows - 1; g-- > 0;) {
    double best_after = std::numeric_limits<double>::infinity();
    for (std::size_t t = cols; t-- > 0;) {
      best_after = std::min(best_after, suffix[g + 1][t]);
      suffix[g][t] = table[g][t] + best_after;
    }
  }
  std::size_t lo = 0;
  for (std::size_t g = 0; g < rows; ++g) {
    std::size_t best = lo;
    for (std::size_t t = lo + 1; t < cols; ++t) {
      if (suffix[g][t] < suffix[g][best]) best = t;
    }
    r.matches.emplace_back(g, best);
    r.per_frame_distances.push_back(table[g][best]);
    lo = best;
  }
  return r;
}

AlignmentResult align_frames(const FrameSequence &gen, const FrameSequence &gt,
                             const DistanceBackend &backend, AlignMode mode, std::size_t jobs) {
  return align_table(distance_table(gen, gt, backend, jobs), mode);
}

VideoScore score_video(const FrameSequence &gen, const FrameSequence &gt, const DistanceBackend &backend,
                       AlignMode mode, std::size_t jobs) {
  const auto alignment = align_frames(gen, gt, backend, mode, jobs);
  return VideoScore{backend.id(), alignment.mean(), gen.size()};
}

double aggregate(std::span<const VideoScore> scores) {
  if (scores.empty()) {
    throw StructureError("aggregate of zero videos");
  }
  double sum = 0;
  for (const auto &s : scores) {
    if (s.metric_id != scores.front().metric_id) {
      throw StructureError("cannot aggregate mixed metrics '" + scores.front().metric_id + "' and '" +
                           s.metric_id + "'");
    }
    sum += s.value;
  }
  return sum / static_cast<double>(scores.size());
}

GaussianStats gaussian_stats(std::span<const EmbeddingSet> sets) {
  std::size_t n = 0, dim = 0;
  for (const auto &es : sets) {
    es.validate();
    if (dim == 0) dim = es.dimension;
    if (es.dimension != dim) {
      throw StructureError("embedding sets have different dimensions");
    }
    n += es.count();
  }
  if (n < 2) {
    throw RangeError("gaussian statistics need at least 2 samples, got " + std::to_string(n));
  }
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  Eigen::Index row = 0;
  for (const auto &es : sets) {
    for (const auto &v : es.vectors) {
      samples.row(row++) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(dim));
    }
  }
  GaussianStats s;
  s.count = n;
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

GaussianStats gaussian_stats(const EmbeddingSet &es) { return gaussian_stats(std::span(&es, 1)); }

namespace {

constexpr double kNegativeEigenTolerance = 1e-6;

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigensolve(const Eigen::MatrixXd &m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition did not converge");
  }
  if (solver.eigenvalues().size() > 0 && solver.eigenvalues().minCoeff() < -kNegativeEigenTolerance) {
    throw NumericalError("matrix has a negative eigenvalue " + std::to_string(solver.eigenvalues().minCoeff()));
  }
  return solver;
}

} // namespace

double frechet_distance(const GaussianStats &a, const GaussianStats &b) {
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows() ||
      a.covariance.rows() != a.mean.size()) {
    throw StructureError("frechet distance: dimension mismatch");
  }
  // Tr((A B)^{1/2}) equals Tr((A^{1/2} B A^{1/2})^{1/2}), whose argument is
  // symmetric positive semidefinite.
  const auto ea = eigensolve(a.covariance);
  const Eigen::VectorXd sqrt_vals = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * sqrt_vals.asDiagonal() * ea.eigenvectors().transpose();
  const auto em = eigensolve(sqrt_a * b.covariance * sqrt_a);
  const double trace_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double d2 = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_sqrt;
  return std::max(d2, 0.0);
}

AlignMode parse_align_mode(const std::string &s) {
  if (s == "monotone") return AlignMode::Monotone;
  if (s == "nearest") return AlignMode::Nearest;
  throw Error("unknown alignment mode '" + s + "' (expected monotone or nearest)");
}

std::string to_string(AlignMode mode) { return mode == AlignMode::Monotone ? "monotone" : "nearest"; }

} // namespace pb
