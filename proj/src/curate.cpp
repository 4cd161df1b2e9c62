#include "pb/curate.hpp"

#include "pb/errors.hpp"
#include "pb/io.hpp"
#include "pb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace pb {

namespace {

constexpr int kMaxGradientFrames = 16;
constexpr double kFillTolerance = 0.5;
constexpr int kFillMaxIterations = 500;

std::size_t first_frame_at_or_after(const FrameSequence &v, const Rational &t) {
  const auto &frames = v.frames();
  const Rational t0 = v.front().timestamp();
  auto it = std::lower_bound(frames.begin(), frames.end(), t,
                             [&](const Frame &f, const Rational &x) { return f.timestamp() - t0 < x; });
  return static_cast<std::size_t>(it - frames.begin());
}

// Last frame whose relative timestamp is <= t.
std::size_t frame_at(const FrameSequence &v, const Rational &t) {
  const auto &frames = v.frames();
  const Rational t0 = v.front().timestamp();
  auto it = std::upper_bound(frames.begin(), frames.end(), t,
                             [&](const Rational &x, const Frame &f) { return x < f.timestamp() - t0; });
  const auto idx = static_cast<std::size_t>(it - frames.begin());
  return idx == 0 ? 0 : idx - 1;
}

bool has_label(const std::vector<std::string> &labels, const std::string &label) {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::optional<PixelRect> clip_to_canvas(const PixelRect &box, const PixelRect &canvas) {
  PixelRect r{std::max(box.x0, canvas.x0) - canvas.x0, std::max(box.y0, canvas.y0) - canvas.y0,
              std::min(box.x1, canvas.x1) - canvas.x0, std::min(box.y1, canvas.y1) - canvas.y0};
  if (r.empty()) return std::nullopt;
  return r;
}

} // namespace

CanvasMode parse_canvas_mode(const std::string &s) {
  if (s == "detector") return CanvasMode::Detector;
  if (s == "gradient-split") return CanvasMode::GradientSplit;
  throw Error("unknown canvas mode '" + s + "' (expected detector or gradient-split)");
}

std::string to_string(CanvasMode mode) {
  return mode == CanvasMode::Detector ? "detector" : "gradient-split";
}

void PipelineConfig::validate() const {
  if (segment_seconds <= Rational(0)) throw RangeError("segment_seconds must be positive");
  if (sample_fps <= Rational(0)) throw RangeError("sample_fps must be positive");
  if (samples_per_segment < 1) throw RangeError("samples_per_segment must be at least 1");
  if (!(detection_threshold >= 0.0 && detection_threshold <= 1.0)) {
    throw RangeError("detection_threshold must lie in [0,1]");
  }
  if (!(search_band.first >= 0.0 && search_band.first < search_band.second && search_band.second <= 1.0)) {
    throw RangeError("search_band must satisfy 0 <= lo < hi <= 1");
  }
}

SegmentMedianState SegmentMedianState::initial(int width, int height, int channels) {
  return SegmentMedianState{Frame::filled(width, height, channels, 255), OcclusionMask(width, height, false)};
}

std::pair<std::size_t, std::size_t> trim_temporal(const FrameSequence &v, const DetectionSet &det,
                                                  const std::string &label, double threshold) {
  std::optional<std::size_t> first, last;
  for (const auto &fd : det.frames) {
    if (fd.index >= v.size()) {
      throw StageError("trim", "detections reference frame " + std::to_string(fd.index) +
                                   " beyond the " + std::to_string(v.size()) + "-frame video");
    }
    const bool hit = std::any_of(fd.detections.begin(), fd.detections.end(), [&](const Detection &d) {
      return d.label == label && d.score >= threshold;
    });
    if (hit) {
      first = std::min(first.value_or(fd.index), fd.index);
      last = std::max(last.value_or(fd.index), fd.index);
    }
  }
  if (!first) {
    throw StageError("trim", "label '" + label + "' never detected");
  }
  return {*first, *last};
}

std::optional<PixelRect> locate_canvas_detector(const DetectionSet &det, double threshold, const std::string &label,
                                                std::optional<std::pair<std::size_t, std::size_t>> range) {
  std::vector<const FrameDetections *> candidates;
  for (const auto &fd : det.frames) {
    if (range && (fd.index < range->first || fd.index > range->second)) continue;
    if (std::any_of(fd.detections.begin(), fd.detections.end(),
                    [&](const Detection &d) { return d.label == label && d.score >= threshold; })) {
      candidates.push_back(&fd);
    }
  }
  if (candidates.empty()) {
    return std::nullopt;
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const FrameDetections *a, const FrameDetections *b) { return a->index < b->index; });
  const FrameDetections &median = *candidates[(candidates.size() - 1) / 2];
  const Detection *best = nullptr;
  for (const auto &d : median.detections) {
    if (d.label == label && d.score >= threshold && (!best || d.score > best->score)) best = &d;
  }
  return best->box;
}

std::vector<double> column_gradient_energy(const FrameSequence &v) {
  if (v.empty()) {
    throw StageError("localize", "empty sequence");
  }
  const int w = v.width(), h = v.height();
  if (w < 4) {
    throw StageError("localize", "frame width " + std::to_string(w) + " too small for a gradient split");
  }
  const std::size_t n = std::min<std::size_t>(v.size(), kMaxGradientFrames);
  std::vector<double> energy(static_cast<std::size_t>(w - 1), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = n == 1 ? 0 : (k * (v.size() - 1) + (n - 1) / 2) / (n - 1);
    const Frame gray = to_grayscale(v[idx]);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) {
        energy[static_cast<std::size_t>(x)] += std::abs(static_cast<int>(gray.at(x + 1, y)) - gray.at(x, y));
      }
    }
  }
  return energy;
}

int locate_canvas_gradient(const FrameSequence &v, std::pair<double, double> band) {
  const auto energy = column_gradient_energy(v);
  const int w = v.width();
  const int lo = std::clamp(static_cast<int>(std::floor(band.first * w)), 0, w - 2);
  const int hi = std::clamp(static_cast<int>(std::floor(band.second * w)), lo, w - 2);
  int best = lo;
  for (int x = lo + 1; x <= hi; ++x) {
    if (energy[static_cast<std::size_t>(x)] > energy[static_cast<std::size_t>(best)]) best = x;
  }
  return best;
}

std::vector<Segment> partition_segments(const FrameSequence &v, const PipelineConfig &cfg) {
  cfg.validate();
  if (v.empty()) {
    throw StageError("partition", "empty sequence");
  }
  const Rational duration = v.duration();
  const auto n = static_cast<std::size_t>((duration / cfg.segment_seconds).ceil());
  const Rational sample_step = Rational(1) / cfg.sample_fps;
  std::vector<Segment> segments;
  segments.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Segment s;
    s.index = k;
    s.start_time = cfg.segment_seconds * Rational(static_cast<std::int64_t>(k));
    const Rational end_time = std::min(s.start_time + cfg.segment_seconds, duration);
    s.begin = first_frame_at_or_after(v, s.start_time);
    s.end = first_frame_at_or_after(v, end_time);
    for (std::size_t j = 0; j < cfg.samples_per_segment; ++j) {
      const Rational t = s.start_time + sample_step * Rational(static_cast<std::int64_t>(j));
      if (t >= end_time) break;
      const std::size_t idx = frame_at(v, t);
      if (s.samples.empty() || s.samples.back() != idx) s.samples.push_back(idx);
    }
    segments.push_back(std::move(s));
  }
  return segments;
}

PartialMedian partial_median(std::span<const Frame> samples, std::span<const OcclusionMask> masks) {
  if (samples.empty()) {
    throw StageError("median", "empty sample list");
  }
  if (masks.size() != samples.size()) {
    throw StageError("median", "got " + std::to_string(masks.size()) + " masks for " +
                                   std::to_string(samples.size()) + " samples");
  }
  const Frame &first = samples.front();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].same_shape(first)) throw StageError("median", "sample shape mismatch", i);
    if (!masks[i].matches(first)) throw StageError("median", "mask shape mismatch", i);
  }
  const int w = first.width(), h = first.height(), c = first.channels();
  PartialMedian out{Frame::filled(w, h, c, 0), OcclusionMask(w, h, false)};
  std::vector<std::uint8_t> values;
  values.reserve(samples.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any = false;
      for (int k = 0; k < c; ++k) {
        values.clear();
        for (std::size_t i = 0; i < samples.size(); ++i) {
          if (!masks[i].at(x, y)) values.push_back(samples[i].at(x, y, k));
        }
        if (values.empty()) break;
        any = true;
        auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
        std::nth_element(values.begin(), mid, values.end());
        out.values.at(x, y, k) = *mid;
      }
      out.filled.set(x, y, any);
    }
  }
  return out;
}

SegmentMedianState apply_prior_fill(const PartialMedian &partial, const SegmentMedianState &prior) {
  if (!partial.values.same_shape(prior.current_median) || !prior.filled.matches(partial.values)) {
    throw StageError("median", "prior state shape does not match the samples");
  }
  SegmentMedianState out{partial.values, partial.filled};
  const int w = partial.values.width(), h = partial.values.height(), c = partial.values.channels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (partial.filled.at(x, y)) continue;
      for (int k = 0; k < c; ++k) out.current_median.at(x, y, k) = prior.current_median.at(x, y, k);
      out.filled.set(x, y, prior.filled.at(x, y));
    }
  }
  return out;
}

SegmentMedianState masked_median(std::span<const Frame> samples, std::span<const OcclusionMask> masks,
                                 const SegmentMedianState &prior) {
  return apply_prior_fill(partial_median(samples, masks), prior);
}

Frame diffusion_fill(const Frame &f, const OcclusionMask &hole) {
  if (!hole.matches(f)) {
    throw StructureError("fill mask does not match the frame");
  }
  const std::size_t holes = hole.count();
  if (holes == 0) {
    return f;
  }
  if (holes == f.pixel_count()) {
    throw StageError("overlay", "nothing to fill from: the overlay covers the whole frame");
  }
  const int w = f.width(), h = f.height(), c = f.channels();
  Frame out = f;
  std::vector<double> img(static_cast<std::size_t>(w) * h);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  for (int k = 0; k < c; ++k) {
    double known_sum = 0;
    std::size_t known_n = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        img[idx(x, y)] = f.at(x, y, k);
        if (!hole.at(x, y)) {
          known_sum += f.at(x, y, k);
          ++known_n;
        }
      }
    }
    const double known_mean = known_sum / static_cast<double>(known_n);
    // Start from the average of row-wise and column-wise linear interpolation
    // between the nearest known pixels.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!hole.at(x, y)) continue;
        double sum = 0;
        int n = 0;
        auto interp = [&](int a_pos, double a_val, bool has_a, int b_pos, double b_val, bool has_b, int pos) {
          if (has_a && has_b) {
            sum += a_val + (b_val - a_val) * (pos - a_pos) / static_cast<double>(b_pos - a_pos);
            ++n;
          } else if (has_a) {
            sum += a_val;
            ++n;
          } else if (has_b) {
            sum += b_val;
            ++n;
          }
        };
        int l = x - 1, r = x + 1, u = y - 1, d = y + 1;
        while (l >= 0 && hole.at(l, y)) --l;
        while (r < w && hole.at(r, y)) ++r;
        while (u >= 0 && hole.at(x, u)) --u;
        while (d < h && hole.at(x, d)) ++d;
        interp(l, l >= 0 ? f.at(l, y, k) : 0.0, l >= 0, r, r < w ? f.at(r, y, k) : 0.0, r < w, x);
        interp(u, u >= 0 ? f.at(x, u, k) : 0.0, u >= 0, d, d < h ? f.at(x, d, k) : 0.0, d < h, y);
        img[idx(x, y)] = n ? sum / n : known_mean;
      }
    }
    for (int iter = 0; iter < kFillMaxIterations; ++iter) {
      double max_change = 0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!hole.at(x, y)) continue;
          double sum = 0;
          int n = 0;
          if (x > 0) sum += img[idx(x - 1, y)], ++n;
          if (x + 1 < w) sum += img[idx(x + 1, y)], ++n;
          if (y > 0) sum += img[idx(x, y - 1)], ++n;
          if (y + 1 < h) sum += img[idx(x, y + 1)], ++n;
          const double next = sum / n;
          max_change = std::max(max_change, std::abs(next - img[idx(x, y)]));
          img[idx(x, y)] = next;
        }
      }
      if (max_change < kFillTolerance) break;
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (hole.at(x, y)) {
          out.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(std::lround(img[idx(x, y)]), 0L, 255L));
        }
      }
    }
  }
  return out;
}

Frame remove_overlays(const Frame &f, std::span<const PixelRect> boxes) {
  if (boxes.empty()) {
    return f;
  }
  OcclusionMask hole(f.width(), f.height(), false);
  for (const auto &b : boxes) {
    if (!b.within(f.width(), f.height())) {
      throw RangeError("overlay box outside the frame");
    }
    hole.fill_rect(b);
  }
  return diffusion_fill(f, hole);
}

Frame ExternalInpainter::operator()(const Frame &f, const OcclusionMask &mask, std::size_t index) const {
  std::filesystem::create_directories(workdir);
  write_image(f, workdir / frame_filename("overlay_in_", index));
  write_mask(mask, workdir / frame_filename("overlay_mask_", index));
  const auto out_path = workdir / frame_filename("overlay_out_", index);
  std::filesystem::remove(out_path);
  const std::string cmd = "cd '" + workdir.string() + "' && " + command;
  if (const int rc = std::system(cmd.c_str()); rc != 0) {
    throw StageError("overlay", "external inpainter exited with status " + std::to_string(rc), index);
  }
  Frame filled = read_image(out_path);
  if (!filled.same_shape(f)) {
    throw StageError("overlay", "external inpainter changed the frame shape", index);
  }
  return filled.with_timestamp(f.timestamp());
}

FrameSequence reverse_sequence(const FrameSequence &v) {
  if (v.empty()) {
    throw StructureError("cannot reverse an empty sequence");
  }
  const Rational first = v.front().timestamp();
  const Rational last = v.back().timestamp();
  std::vector<Frame> frames;
  frames.reserve(v.size());
  for (std::size_t i = v.size(); i-- > 0;) {
    frames.push_back(v[i].with_timestamp(first + last - v[i].timestamp()));
  }
  return FrameSequence(std::move(frames), v.fps());
}

PipelineResult run_pipeline(const FrameSequence &video, const DetectionSet &det,
                            std::span<const OcclusionMask> masks, const PipelineConfig &cfg,
                            const Inpainter &inpainter) {
  cfg.validate();
  if (video.empty()) {
    throw StageError("load", "empty video");
  }
  if (!masks.empty() && masks.size() != video.size()) {
    throw StageError("masks", "got " + std::to_string(masks.size()) + " masks for " +
                                  std::to_string(video.size()) + " frames");
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i].matches(video[i])) throw StageError("masks", "mask size differs from frame", i);
  }
  try {
    det.validate(video.width(), video.height());
  } catch (const StructureError &e) {
    throw StageError("detections", e.what());
  }

  PipelineResult result;
  auto &report = result.report;

  const auto [start, end] = trim_temporal(video, det, cfg.trim_label, cfg.detection_threshold);
  report.trim_start = start;
  report.trim_end = end;
  std::vector<Frame> kept(video.frames().begin() + static_cast<std::ptrdiff_t>(start),
                          video.frames().begin() + static_cast<std::ptrdiff_t>(end) + 1);
  const FrameSequence trimmed(std::move(kept), video.fps());

  std::optional<PixelRect> canvas;
  if (cfg.canvas_mode == CanvasMode::Detector) {
    canvas = locate_canvas_detector(det, cfg.detection_threshold, cfg.canvas_label, std::pair{start, end});
    report.canvas_source = "detector";
  }
  if (!canvas) {
    const int split = locate_canvas_gradient(trimmed, cfg.search_band);
    report.split_column = split;
    report.canvas_source = cfg.canvas_mode == CanvasMode::Detector ? "gradient-split (detector fallback)"
                                                                   : "gradient-split";
    canvas = PixelRect{split + 1, 0, video.width(), video.height()};
  }
  report.canvas = *canvas;

  std::vector<Frame> cropped;
  std::vector<OcclusionMask> cropped_masks;
  cropped.reserve(trimmed.size());
  cropped_masks.reserve(trimmed.size());
  for (std::size_t i = 0; i < trimmed.size(); ++i) {
    const std::size_t src = start + i;
    try {
      cropped.push_back(crop(trimmed[i], *canvas));
    } catch (const RangeError &e) {
      throw StageError("crop", e.what(), src);
    }
    if (!masks.empty()) {
      cropped_masks.push_back(crop(masks[src], *canvas));
    } else {
      OcclusionMask m(canvas->width(), canvas->height(), false);
      for (const auto &d : det.at(src)) {
        if (d.score < cfg.detection_threshold || !has_label(cfg.occluder_labels, d.label)) continue;
        if (auto r = clip_to_canvas(d.box, *canvas)) m.fill_rect(*r);
      }
      cropped_masks.push_back(std::move(m));
    }
  }
  const FrameSequence canvas_seq(std::move(cropped), trimmed.fps());

  const auto segments = partition_segments(canvas_seq, cfg);
  std::vector<std::optional<PartialMedian>> partials(segments.size());
  parallel_for(segments.size(), cfg.jobs, [&](std::size_t k) {
    std::vector<Frame> samples;
    std::vector<OcclusionMask> sample_masks;
    for (const auto idx : segments[k].samples) {
      samples.push_back(canvas_seq[idx]);
      sample_masks.push_back(cropped_masks[idx]);
    }
    partials[k] = partial_median(samples, sample_masks);
  });

  for (std::size_t i = start; i <= end; ++i) {
    for (const auto &d : det.at(i)) {
      if (d.score < cfg.detection_threshold || !has_label(cfg.overlay_labels, d.label)) continue;
      if (auto r = clip_to_canvas(d.box, *canvas)) {
        if (std::find(report.overlay_boxes.begin(), report.overlay_boxes.end(), *r) == report.overlay_boxes.end()) {
          report.overlay_boxes.push_back(*r);
        }
      }
    }
  }

  const Rational key_fps = Rational(1) / cfg.segment_seconds;
  std::vector<Frame> keyframes;
  keyframes.reserve(segments.size());
  auto state = SegmentMedianState::initial(canvas->width(), canvas->height(), video.channels());
  for (std::size_t k = 0; k < segments.size(); ++k) {
    state = apply_prior_fill(*partials[k], state);
    SegmentReport sr;
    sr.index = k;
    sr.start_time = segments[k].start_time;
    sr.begin = start + segments[k].begin;
    sr.end = start + segments[k].end;
    sr.sample_count = segments[k].samples.size();
    sr.filled_pixels = partials[k]->filled.count();
    sr.blank_pixels = state.current_median.pixel_count() - state.filled.count();
    sr.inherited_pixels = state.current_median.pixel_count() - sr.filled_pixels - sr.blank_pixels;
    report.segments.push_back(sr);

    Frame key = state.current_median.with_timestamp(segments[k].start_time);
    if (!report.overlay_boxes.empty()) {
      if (inpainter) {
        OcclusionMask hole(key.width(), key.height(), false);
        for (const auto &b : report.overlay_boxes) hole.fill_rect(b);
        key = inpainter(key, hole, k).with_timestamp(segments[k].start_time);
      } else {
        key = remove_overlays(key, report.overlay_boxes);
      }
    }
    keyframes.push_back(std::move(key));
  }
  result.keyframes = FrameSequence(std::move(keyframes), key_fps);
  if (cfg.reverse) {
    result.keyframes = reverse_sequence(result.keyframes);
  }
  return result;
}

nlohmann::json manifest_json(const PipelineResult &result, const PipelineConfig &cfg) {
  const auto &r = result.report;
  auto rect = [](const PixelRect &b) { return nlohmann::json::array({b.x0, b.y0, b.x1, b.y1}); };
  nlohmann::json segments = nlohmann::json::array();
  for (const auto &s : r.segments) {
    segments.push_back({{"index", s.index},
                        {"start_time", s.start_time.str()},
                        {"frames", {s.begin, s.end}},
                        {"samples", s.sample_count},
                        {"filled_pixels", s.filled_pixels},
                        {"inherited_pixels", s.inherited_pixels},
                        {"blank_pixels", s.blank_pixels}});
  }
  nlohmann::json overlays = nlohmann::json::array();
  for (const auto &b : r.overlay_boxes) overlays.push_back(rect(b));
  nlohmann::json j;
  j["config"] = {{"segment_seconds", cfg.segment_seconds.str()},
                 {"sample_fps", cfg.sample_fps.str()},
                 {"samples_per_segment", cfg.samples_per_segment},
                 {"trim_label", cfg.trim_label},
                 {"canvas_label", cfg.canvas_label},
                 {"canvas_mode", to_string(cfg.canvas_mode)},
                 {"detection_threshold", cfg.detection_threshold},
                 {"search_band", {cfg.search_band.first, cfg.search_band.second}},
                 {"occluder_labels", cfg.occluder_labels},
                 {"overlay_labels", cfg.overlay_labels},
                 {"reverse", cfg.reverse},
                 {"segment_count_rounding", "ceil"}};
  j["trim"] = {r.trim_start, r.trim_end};
  j["canvas"] = {{"box", rect(r.canvas)}, {"source", r.canvas_source}};
  j["canvas"]["split_column"] = r.split_column ? nlohmann::json(*r.split_column) : nlohmann::json(nullptr);
  j["overlay_boxes"] = std::move(overlays);
  j["segments"] = std::move(segments);
  j["keyframe_count"] = result.keyframes.size();
  return j;
}

} // namespace pb
