#pragma once

#include "pb/rational.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pb {

// Axis-aligned pixel rectangle, half-open: columns [x0, x1), rows [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool within(int w, int h) const { return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= w && y1 <= h; }
  friend bool operator==(const PixelRect &, const PixelRect &) = default;
};

// One 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
class Frame {
public:
  Frame() = default;
  Frame(int width, int height, int channels, std::vector<std::uint8_t> data, Rational timestamp = {});
  // Frame filled with a constant sample value.
  static Frame filled(int width, int height, int channels, std::uint8_t value, Rational timestamp = {});

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  const Rational &timestamp() const { return timestamp_; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t &at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool same_shape(const Frame &o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  Frame with_timestamp(Rational ts) const;

  // Pixel equality; timestamps are ignored.
  bool same_pixels(const Frame &o) const { return same_shape(o) && data_ == o.data_; }
  friend bool operator==(const Frame &, const Frame &) = default;

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
  Rational timestamp_;
};

// Ordered frames sharing one shape, with strictly increasing timestamps.
class FrameSequence {
public:
  FrameSequence() = default;
  FrameSequence(std::vector<Frame> frames, Rational fps);
  // Stamps frame i with timestamp i / fps.
  static FrameSequence from_frames(std::vector<Frame> frames, Rational fps);

  const std::vector<Frame> &frames() const { return frames_; }
  const Frame &operator[](std::size_t i) const { return frames_[i]; }
  const Frame &front() const { return frames_.front(); }
  const Frame &back() const { return frames_.back(); }
  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Rational &fps() const { return fps_; }

  int width() const { return frames_.empty() ? 0 : frames_.front().width(); }
  int height() const { return frames_.empty() ? 0 : frames_.front().height(); }
  int channels() const { return frames_.empty() ? 0 : frames_.front().channels(); }

  // Time covered by the sequence: last - first timestamp plus one frame period.
  Rational duration() const;

  friend bool operator==(const FrameSequence &, const FrameSequence &) = default;

private:
  std::vector<Frame> frames_;
  Rational fps_{1};
};

// Per-pixel exclusion map; true marks an occluded pixel.
class OcclusionMask {
public:
  OcclusionMask() = default;
  OcclusionMask(int width, int height, bool value = false);
  OcclusionMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  void fill_rect(const PixelRect &r, bool v = true);
  std::size_t count() const;
  bool matches(const Frame &f) const { return f.width() == width_ && f.height() == height_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const OcclusionMask &, const OcclusionMask &) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Detection {
  std::string label;
  PixelRect box;
  double score = 0.0;
  friend bool operator==(const Detection &, const Detection &) = default;
};

struct FrameDetections {
  std::size_t index = 0;
  std::vector<Detection> detections;
  friend bool operator==(const FrameDetections &, const FrameDetections &) = default;
};

// Externally produced labeled boxes, keyed by frame index.
struct DetectionSet {
  std::vector<FrameDetections> frames;

  // Detections for a frame index, empty when the frame has none.
  std::span<const Detection> at(std::size_t index) const;
  // Throws StructureError for boxes outside width x height or scores outside [0,1].
  void validate(int width, int height) const;
  friend bool operator==(const DetectionSet &, const DetectionSet &) = default;
};

// Precomputed per-frame feature vectors.
struct EmbeddingSet {
  std::string model_id;
  std::size_t dimension = 0;
  std::vector<std::vector<double>> vectors;

  std::size_t count() const { return vectors.size(); }
  void validate() const;
};

Frame to_grayscale(const Frame &f);
Frame crop(const Frame &f, const PixelRect &box);
OcclusionMask crop(const OcclusionMask &m, const PixelRect &box);
// Bilinear resampling with pixel-center alignment.
Frame resize_bilinear(const Frame &f, int width, int height);
std::vector<double> to_unit_floats(const Frame &f);

} // namespace pb
