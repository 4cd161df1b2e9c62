#include "pb/frame.hpp"

#include "pb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pb {

Frame::Frame(int width, int height, int channels, std::vector<std::uint8_t> data, Rational timestamp)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)),
      timestamp_(timestamp) {
  if (width < 1 || height < 1) {
    throw StructureError("frame dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw StructureError("frame must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw StructureError("frame data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
  if (timestamp < Rational(0)) {
    throw StructureError("negative frame timestamp");
  }
}

Frame Frame::filled(int width, int height, int channels, std::uint8_t value, Rational timestamp) {
  return Frame(width, height, channels,
               std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                             std::max(height, 0) * std::max(channels, 0),
                                         value),
               timestamp);
}

Frame Frame::with_timestamp(Rational ts) const {
  Frame copy = *this;
  if (ts < Rational(0)) {
    throw StructureError("negative frame timestamp");
  }
  copy.timestamp_ = ts;
  return copy;
}

FrameSequence::FrameSequence(std::vector<Frame> frames, Rational fps)
    : frames_(std::move(frames)), fps_(fps) {
  if (fps <= Rational(0)) {
    throw StructureError("fps must be positive");
  }
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (!frames_[i].same_shape(frames_[0])) {
      throw StructureError("frame " + std::to_string(i) + " is " +
                           std::to_string(frames_[i].width()) + "x" +
                           std::to_string(frames_[i].height()) + "x" +
                           std::to_string(frames_[i].channels()) + ", expected " +
                           std::to_string(frames_[0].width()) + "x" +
                           std::to_string(frames_[0].height()) + "x" +
                           std::to_string(frames_[0].channels()));
    }
    if (!(frames_[i - 1].timestamp() < frames_[i].timestamp())) {
      throw StructureError("timestamps not strictly increasing at frame " + std::to_string(i));
    }
  }
}

FrameSequence FrameSequence::from_frames(std::vector<Frame> frames, Rational fps) {
  if (fps <= Rational(0)) {
    throw StructureError("fps must be positive");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i] = frames[i].with_timestamp(Rational(static_cast<std::int64_t>(i)) / fps);
  }
  return FrameSequence(std::move(frames), fps);
}

Rational FrameSequence::duration() const {
  if (frames_.empty()) {
    return Rational(0);
  }
  return frames_.back().timestamp() - frames_.front().timestamp() + Rational(1) / fps_;
}

OcclusionMask::OcclusionMask(int width, int height, bool value)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), value ? 1 : 0) {
  if (width < 1 || height < 1) {
    throw StructureError("mask dimensions must be positive");
  }
}

OcclusionMask::OcclusionMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) {
    throw StructureError("mask dimensions must be positive");
  }
  if (bits_.size() != static_cast<std::size_t>(width) * height) {
    throw StructureError("mask bit count does not match its dimensions");
  }
  for (auto &b : bits_) b = b ? 1 : 0;
}

void OcclusionMask::fill_rect(const PixelRect &r, bool v) {
  const int x0 = std::clamp(r.x0, 0, width_), x1 = std::clamp(r.x1, 0, width_);
  const int y0 = std::clamp(r.y0, 0, height_), y1 = std::clamp(r.y1, 0, height_);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) set(x, y, v);
  }
}

std::size_t OcclusionMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::span<const Detection> DetectionSet::at(std::size_t index) const {
  for (const auto &fd : frames) {
    if (fd.index == index) return fd.detections;
  }
  return {};
}

void DetectionSet::validate(int width, int height) const {
  for (const auto &fd : frames) {
    for (const auto &d : fd.detections) {
      if (!d.box.within(width, height)) {
        throw StructureError("detection '" + d.label + "' in frame " + std::to_string(fd.index) +
                             " has a box outside " + std::to_string(width) + "x" +
                             std::to_string(height));
      }
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw StructureError("detection score outside [0,1] in frame " + std::to_string(fd.index));
      }
    }
  }
}

void EmbeddingSet::validate() const {
  if (dimension == 0) {
    throw StructureError("embedding dimension must be positive");
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dimension) {
      throw StructureError("embedding " + std::to_string(i) + " has length " +
                           std::to_string(vectors[i].size()) + ", expected " +
                           std::to_string(dimension));
    }
  }
}

Frame to_grayscale(const Frame &f) {
  if (f.channels() == 1) {
    return f;
  }
  std::vector<std::uint8_t> out(f.pixel_count());
  const auto src = f.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double luma = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return Frame(f.width(), f.height(), 1, std::move(out), f.timestamp());
}

Frame crop(const Frame &f, const PixelRect &box) {
  if (!box.within(f.width(), f.height())) {
    throw RangeError("crop box (" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                     std::to_string(box.x1) + "," + std::to_string(box.y1) +
                     ") outside frame " + std::to_string(f.width()) + "x" +
                     std::to_string(f.height()));
  }
  const int c = f.channels();
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(box.width()) * box.height() * c);
  const auto src = f.data();
  for (int y = box.y0; y < box.y1; ++y) {
    const auto row = src.subspan((static_cast<std::size_t>(y) * f.width() + box.x0) * c,
                                 static_cast<std::size_t>(box.width()) * c);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Frame(box.width(), box.height(), c, std::move(out), f.timestamp());
}

OcclusionMask crop(const OcclusionMask &m, const PixelRect &box) {
  if (!box.within(m.width(), m.height())) {
    throw RangeError("crop box outside mask");
  }
  OcclusionMask out(box.width(), box.height());
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) out.set(x - box.x0, y - box.y0, m.at(x, y));
  }
  return out;
}

Frame resize_bilinear(const Frame &f, int width, int height) {
  if (width == f.width() && height == f.height()) {
    return f;
  }
  if (width < 1 || height < 1) {
    throw RangeError("resize target must be positive");
  }
  const int c = f.channels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height * c);
  const double sx = static_cast<double>(f.width()) / width;
  const double sy = static_cast<double>(f.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(f.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, f.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(f.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, f.width() - 1);
      const double wx = fx - x0;
      for (int k = 0; k < c; ++k) {
        const double top = f.at(x0, y0, k) * (1 - wx) + f.at(x1, y0, k) * wx;
        const double bottom = f.at(x0, y1, k) * (1 - wx) + f.at(x1, y1, k) * wx;
        out[(static_cast<std::size_t>(y) * width + x) * c + k] =
            static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - wy) + bottom * wy), 0L, 255L));
      }
    }
  }
  return Frame(width, height, c, std::move(out), f.timestamp());
}

std::vector<double> to_unit_floats(const Frame &f) {
  std::vector<double> out(f.data().size());
  std::transform(f.data().begin(), f.data().end(), out.begin(),
                 [](std::uint8_t v) { return v / 255.0; });
  return out;
}

} // namespace pb
