#pragma once

#include "pb/frame.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pb {

enum class CanvasMode { Detector, GradientSplit };

CanvasMode parse_canvas_mode(const std::string &s);
std::string to_string(CanvasMode mode);

struct PipelineConfig {
  Rational segment_seconds{10};
  Rational sample_fps{3};
  std::size_t samples_per_segment = 30;
  std::string trim_label = "hand";
  std::string canvas_label = "canvas";
  CanvasMode canvas_mode = CanvasMode::Detector;
  double detection_threshold = 0.35;
  std::pair<double, double> search_band{0.2, 0.8};
  // Labels whose boxes become occlusion masks when no mask files are given.
  std::vector<std::string> occluder_labels{"hand", "brush"};
  // Labels removed from keyframes by the overlay fill.
  std::vector<std::string> overlay_labels{"logo", "text"};
  bool reverse = false;
  std::size_t jobs = 1;

  void validate() const;
};

// Running result of the segment chain. `filled` marks pixels that hold real
// sample data (true) rather than the white initialization.
struct SegmentMedianState {
  Frame current_median;
  OcclusionMask filled;

  static SegmentMedianState initial(int width, int height, int channels);
};

// One time segment: frames [begin, end) and the frame indices sampled from it.
struct Segment {
  std::size_t index = 0;
  Rational start_time;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> samples;
};

// Per-segment median before prior fill: `filled` marks pixels with at least
// one unoccluded sample.
struct PartialMedian {
  Frame values;
  OcclusionMask filled;
};

// Inclusive (start, end) frame indices of the first and last detection of
// `label` scoring at least `threshold`.
std::pair<std::size_t, std::size_t> trim_temporal(const FrameSequence &v, const DetectionSet &det,
                                                  const std::string &label, double threshold);

// Highest-score box with `label` in the temporally median frame among those
// having such a box; nullopt when none qualifies.
std::optional<PixelRect> locate_canvas_detector(const DetectionSet &det, double threshold,
                                                const std::string &label = "canvas",
                                                std::optional<std::pair<std::size_t, std::size_t>> range = std::nullopt);

// Column x maximizing the summed |I(x+1,y) - I(x,y)| over rows and up to 16
// uniformly sampled frames, restricted to the band columns
// [floor(lo*W), floor(hi*W)] (clamped to [0, W-2]); ties go left. The canvas
// lies right of the returned column.
int locate_canvas_gradient(const FrameSequence &v, std::pair<double, double> band = {0.2, 0.8});
std::vector<double> column_gradient_energy(const FrameSequence &v);

std::vector<Segment> partition_segments(const FrameSequence &v, const PipelineConfig &cfg);

PartialMedian partial_median(std::span<const Frame> samples, std::span<const OcclusionMask> masks);
SegmentMedianState apply_prior_fill(const PartialMedian &partial, const SegmentMedianState &prior);
// Per pixel and channel: lower median of unoccluded samples, else the prior
// value (and the prior's filled bit).
SegmentMedianState masked_median(std::span<const Frame> samples, std::span<const OcclusionMask> masks,
                                 const SegmentMedianState &prior);

// Harmonic fill of the pixels inside `boxes` from their surroundings.
Frame remove_overlays(const Frame &f, std::span<const PixelRect> boxes);
Frame diffusion_fill(const Frame &f, const OcclusionMask &hole);

// File-exchange hook for an external inpainter: writes overlay_in_%06d.png and
// overlay_mask_%06d.png into `workdir`, runs `command` there and reads back
// overlay_out_%06d.png.
struct ExternalInpainter {
  std::string command;
  std::filesystem::path workdir;

  Frame operator()(const Frame &f, const OcclusionMask &mask, std::size_t index) const;
};

using Inpainter = std::function<Frame(const Frame &, const OcclusionMask &, std::size_t)>;

FrameSequence reverse_sequence(const FrameSequence &v);

struct SegmentReport {
  std::size_t index = 0;
  Rational start_time;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t sample_count = 0;
  std::size_t filled_pixels = 0;    // median taken from this segment's samples
  std::size_t inherited_pixels = 0; // copied from an earlier segment
  std::size_t blank_pixels = 0;     // still white initialization
};

struct PipelineReport {
  std::size_t trim_start = 0;
  std::size_t trim_end = 0;
  PixelRect canvas;
  std::string canvas_source;
  std::optional<int> split_column;
  std::vector<PixelRect> overlay_boxes;
  std::vector<SegmentReport> segments;
};

struct PipelineResult {
  FrameSequence keyframes;
  PipelineReport report;
};

// trim -> localize -> crop -> partition -> masked median chain -> overlay fill.
// `masks` is either empty (occluder detections become box masks) or one mask
// per video frame.
PipelineResult run_pipeline(const FrameSequence &video, const DetectionSet &det,
                            std::span<const OcclusionMask> masks, const PipelineConfig &cfg,
                            const Inpainter &inpainter = {});

nlohmann::json manifest_json(const PipelineResult &result, const PipelineConfig &cfg);

} // namespace pb
