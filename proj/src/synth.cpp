#include "pb/synth.hpp"

#include "pb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace pb {

namespace {

constexpr int kPatchSide = 4;
constexpr int kCoarsestLevel = 3;

// Fisher-Yates with raw engine output so the permutation does not depend on
// the standard library's distribution implementations.
template <typename T> void seeded_shuffle(std::vector<T> &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng() % i]);
  }
}

double unit_double(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct RevealUnit {
  const Frame *source;
  PixelRect region;
};

// Per-channel rounded block means of `target` at block side `side`.
Frame block_means(const Frame &target, int side) {
  Frame out = target;
  const int w = target.width(), h = target.height(), c = target.channels();
  for (int by = 0; by < h; by += side) {
    for (int bx = 0; bx < w; bx += side) {
      const int x1 = std::min(bx + side, w), y1 = std::min(by + side, h);
      const int n = (x1 - bx) * (y1 - by);
      for (int k = 0; k < c; ++k) {
        int sum = 0;
        for (int y = by; y < y1; ++y)
          for (int x = bx; x < x1; ++x) sum += target.at(x, y, k);
        const auto mean = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
        for (int y = by; y < y1; ++y)
          for (int x = bx; x < x1; ++x) out.at(x, y, k) = mean;
      }
    }
  }
  return out;
}

std::vector<PixelRect> tiles(int w, int h, int side) {
  std::vector<PixelRect> out;
  for (int y = 0; y < h; y += side)
    for (int x = 0; x < w; x += side) out.push_back({x, y, std::min(x + side, w), std::min(y + side, h)});
  return out;
}

} // namespace

RevealOrder parse_reveal_order(const std::string &s) {
  if (s == "raster") return RevealOrder::Raster;
  if (s == "random-patch") return RevealOrder::RandomPatch;
  if (s == "coarse-to-fine") return RevealOrder::CoarseToFine;
  throw Error("unknown reveal order '" + s + "' (expected raster, random-patch or coarse-to-fine)");
}

std::string to_string(RevealOrder order) {
  switch (order) {
  case RevealOrder::Raster: return "raster";
  case RevealOrder::RandomPatch: return "random-patch";
  case RevealOrder::CoarseToFine: return "coarse-to-fine";
  }
  return "raster";
}

void RevealScript::validate() const {
  if (target.width() < 1) throw StructureError("reveal script has no target");
  if (steps < 1) throw RangeError("steps must be at least 1");
  if (fps <= Rational(0)) throw RangeError("fps must be positive");
  if (occluder) {
    if (occluder->size < 1) throw RangeError("occluder size must be positive");
    if (occluder->trajectory.size() != steps) {
      throw StructureError("occluder trajectory has " + std::to_string(occluder->trajectory.size()) +
                           " positions for " + std::to_string(steps) + " steps");
    }
  }
}

FrameSequence generate_process(const RevealScript &script) {
  script.validate();
  const Frame &target = script.target;
  const int w = target.width(), h = target.height();
  std::mt19937_64 rng(script.seed);

  std::vector<Frame> levels; // keeps block-mean images alive for the units
  std::vector<RevealUnit> units;
  switch (script.order) {
  case RevealOrder::Raster:
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) units.push_back({&target, {x, y, x + 1, y + 1}});
    break;
  case RevealOrder::RandomPatch: {
    auto patches = tiles(w, h, kPatchSide);
    seeded_shuffle(patches, rng);
    for (const auto &p : patches)
      for (int y = p.y0; y < p.y1; ++y)
        for (int x = p.x0; x < p.x1; ++x) units.push_back({&target, {x, y, x + 1, y + 1}});
    break;
  }
  case RevealOrder::CoarseToFine: {
    levels.reserve(kCoarsestLevel);
    for (int level = kCoarsestLevel; level >= 1; --level) levels.push_back(block_means(target, 1 << level));
    for (int level = kCoarsestLevel; level >= 0; --level) {
      auto blocks = tiles(w, h, 1 << level);
      seeded_shuffle(blocks, rng);
      const Frame *src = level == 0 ? &target : &levels[static_cast<std::size_t>(kCoarsestLevel - level)];
      for (const auto &b : blocks) units.push_back({src, b});
    }
    break;
  }
  }

  const std::size_t steps = std::min(script.steps, units.size());
  Frame canvas = Frame::filled(w, h, target.channels(), 255);
  std::vector<Frame> frames;
  frames.reserve(steps);
  std::size_t applied = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t upto = (i + 1) * units.size() / steps;
    for (; applied < upto; ++applied) {
      const auto &u = units[applied];
      for (int y = u.region.y0; y < u.region.y1; ++y)
        for (int x = u.region.x0; x < u.region.x1; ++x)
          for (int k = 0; k < target.channels(); ++k) canvas.at(x, y, k) = u.source->at(x, y, k);
    }
    frames.push_back(canvas);
  }
  return FrameSequence::from_frames(std::move(frames), script.fps);
}

OccludedSequence overlay_occluder(const FrameSequence &v, const RevealScript &script) {
  OccludedSequence out;
  if (v.empty()) {
    throw StructureError("cannot overlay an empty sequence");
  }
  const int w = v.width(), h = v.height();
  if (!script.occluder) {
    out.frames = v;
    out.masks.assign(v.size(), OcclusionMask(w, h, false));
    return out;
  }
  const Occluder &occ = *script.occluder;
  if (occ.trajectory.size() < v.size()) {
    throw StructureError("occluder trajectory shorter than the sequence");
  }
  const int side_w = std::min(occ.size, w), side_h = std::min(occ.size, h);
  const std::uint8_t gray = static_cast<std::uint8_t>(
      std::lround(0.299 * occ.color[0] + 0.587 * occ.color[1] + 0.114 * occ.color[2]));
  std::vector<Frame> frames;
  frames.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int x0 = std::clamp(occ.trajectory[i].first, 0, w - side_w);
    const int y0 = std::clamp(occ.trajectory[i].second, 0, h - side_h);
    const PixelRect box{x0, y0, x0 + side_w, y0 + side_h};
    Frame f = v[i];
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        for (int k = 0; k < f.channels(); ++k) f.at(x, y, k) = f.channels() == 3 ? occ.color[k] : gray;
    frames.push_back(std::move(f));
    OcclusionMask m(w, h, false);
    m.fill_rect(box);
    out.masks.push_back(std::move(m));
    out.detections.frames.push_back({i, {Detection{occ.label, box, 1.0}}});
  }
  out.frames = FrameSequence(std::move(frames), v.fps());
  return out;
}

Frame procedural_target(int width, int height, int channels, std::uint64_t seed) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
    throw RangeError("invalid procedural target shape");
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  struct Wave {
    double fx, fy, phase, amp;
  };
  struct Blob {
    double cx, cy, rx, ry, amp;
  };
  std::vector<std::vector<Wave>> waves(static_cast<std::size_t>(channels));
  std::vector<double> base(static_cast<std::size_t>(channels));
  for (int k = 0; k < channels; ++k) {
    base[static_cast<std::size_t>(k)] = 60 + 120 * unit_double(rng);
    for (int i = 0; i < 6; ++i) {
      // Amplitude falls with frequency for a natural-image-like spectrum.
      const double freq = 0.5 + 4.0 * unit_double(rng);
      const double angle = 2 * std::numbers::pi * unit_double(rng);
      waves[static_cast<std::size_t>(k)].push_back(
          {freq * std::cos(angle), freq * std::sin(angle), 2 * std::numbers::pi * unit_double(rng),
           (20 + 30 * unit_double(rng)) / freq});
    }
  }
  std::vector<Blob> blobs;
  for (int i = 0; i < 3; ++i) {
    blobs.push_back({unit_double(rng), unit_double(rng), 0.08 + 0.2 * unit_double(rng),
                     0.08 + 0.2 * unit_double(rng), 80 * unit_double(rng) - 40});
  }
  Frame out = Frame::filled(width, height, channels, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width, v = (y + 0.5) / height;
      double blob = 0;
      for (const auto &b : blobs) {
        const double dx = (u - b.cx) / b.rx, dy = (v - b.cy) / b.ry;
        if (dx * dx + dy * dy < 1.0) blob += b.amp;
      }
      for (int k = 0; k < channels; ++k) {
        double val = base[static_cast<std::size_t>(k)] + blob;
        for (const auto &wv : waves[static_cast<std::size_t>(k)]) {
          val += wv.amp * std::sin(2 * std::numbers::pi * (wv.fx * u + wv.fy * v) + wv.phase);
        }
        out.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 16L, 239L));
      }
    }
  }
  return out;
}

std::vector<std::pair<int, int>> sweep_trajectory(std::pair<int, int> from, std::pair<int, int> to,
                                                  std::size_t steps) {
  std::vector<std::pair<int, int>> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    out.emplace_back(static_cast<int>(std::lround(from.first + t * (to.first - from.first))),
                     static_cast<int>(std::lround(from.second + t * (to.second - from.second))));
  }
  return out;
}

FrameSequence realize_profile(std::span<const double> values, int width, int height, Rational fps) {
  if (values.empty()) {
    throw StructureError("cannot realize an empty profile");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<Frame> frames;
  frames.reserve(values.size());
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw RangeError("profile values must lie in [0,1]");
    }
    const auto white = static_cast<std::size_t>(std::llround(v * static_cast<double>(n)));
    std::vector<std::uint8_t> px(n, 0);
    std::fill(px.begin(), px.begin() + static_cast<std::ptrdiff_t>(white), 255);
    frames.emplace_back(width, height, 1, std::move(px));
  }
  return FrameSequence::from_frames(std::move(frames), fps);
}

} // namespace pb
