#pragma once

#include "pb/frame.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pb {

enum class RevealOrder { Raster, RandomPatch, CoarseToFine };

RevealOrder parse_reveal_order(const std::string &s);
std::string to_string(RevealOrder order);

struct Occluder {
  int size = 8;
  std::array<std::uint8_t, 3> color{255, 0, 255};
  std::string label = "hand";
  // Top-left corner per frame; clamped so the square stays inside the frame.
  std::vector<std::pair<int, int>> trajectory;
};

struct RevealScript {
  Frame target;
  RevealOrder order = RevealOrder::Raster;
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  Rational fps{3};
  std::optional<Occluder> occluder;

  void validate() const;
};

struct OccludedSequence {
  FrameSequence frames;
  std::vector<OcclusionMask> masks;
  DetectionSet detections;
};

// Painting-process fixture: frame i shows a growing, seeded selection of
// reveal units over a white canvas; the last frame equals the target. Step
// counts above the number of reveal units are clamped.
FrameSequence generate_process(const RevealScript &script);

// Stamps the script's occluder on each frame and reports exact masks and
// label boxes (score 1.0). Without an occluder the input comes back unchanged
// with empty masks and no detections.
OccludedSequence overlay_occluder(const FrameSequence &v, const RevealScript &script);

// Smooth multi-scale test image; every sample lies in [16, 239].
Frame procedural_target(int width, int height, int channels, std::uint64_t seed);

// Evenly spaced occluder positions from `from` to `to` over `steps` frames.
std::vector<std::pair<int, int>> sweep_trajectory(std::pair<int, int> from, std::pair<int, int> to,
                                                  std::size_t steps);

// Grayscale frames whose mse distance to an all-black frame equals each
// value (to within 0.5 / (width * height)); values must lie in [0,1].
FrameSequence realize_profile(std::span<const double> values, int width, int height, Rational fps = Rational(1));

} // namespace pb
