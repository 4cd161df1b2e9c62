#pragma once

#include "pb/frame.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace pbtest {

inline pb::Frame random_frame(std::mt19937_64 &rng, int w, int h, int c) {
  std::uniform_int_distribution<int> px(0, 255);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * c);
  for (auto &v : data) v = static_cast<std::uint8_t>(px(rng));
  return pb::Frame(w, h, c, std::move(data));
}

inline pb::FrameSequence random_sequence(std::mt19937_64 &rng, std::size_t n, int w, int h, int c,
                                         pb::Rational fps = pb::Rational(3)) {
  std::vector<pb::Frame> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(random_frame(rng, w, h, c));
  return pb::FrameSequence::from_frames(std::move(frames), fps);
}

inline pb::OcclusionMask random_mask(std::mt19937_64 &rng, int w, int h, double p) {
  std::bernoulli_distribution occ(p);
  pb::OcclusionMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, occ(rng));
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("pbtest_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace pbtest
