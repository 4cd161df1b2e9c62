#include "pb/backends.hpp"
#include "pb/errors.hpp"
#include "pb/pdp.hpp"
#include "pb/synth.hpp"

#include <doctest.h>

#include <algorithm>

using namespace pb;

namespace {

RevealScript script_for(RevealOrder order, std::size_t steps, std::uint64_t seed = 1) {
  RevealScript s;
  s.target = procedural_target(24, 16, 3, 4);
  s.order = order;
  s.steps = steps;
  s.seed = seed;
  return s;
}

} // namespace

TEST_CASE("procedural targets stay inside the reserved range") {
  for (int c : {1, 3}) {
    const auto t = procedural_target(40, 30, c, 11);
    CHECK(t.channels() == c);
    const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    CHECK(*lo >= 16);
    CHECK(*hi <= 239);
    CHECK(*hi - *lo > 40);
    CHECK(procedural_target(40, 30, c, 11) == t);
    CHECK_FALSE(procedural_target(40, 30, c, 12) == t);
  }
}

TEST_CASE("single step reveals the whole target") {
  for (auto order : {RevealOrder::Raster, RevealOrder::RandomPatch, RevealOrder::CoarseToFine}) {
    const auto s = script_for(order, 1);
    const auto v = generate_process(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].same_pixels(s.target));
  }
}

TEST_CASE("raster order reveals row by row") {
  RevealScript s;
  s.target = procedural_target(5, 4, 1, 2);
  s.steps = 4;
  const auto v = generate_process(s);
  REQUIRE(v.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) CHECK(v[i].at(x, y) == (y <= static_cast<int>(i) ? s.target.at(x, y) : 255));
}

TEST_CASE("generation is deterministic and seed dependent") {
  for (auto order : {RevealOrder::RandomPatch, RevealOrder::CoarseToFine}) {
    const auto a = generate_process(script_for(order, 12, 7));
    CHECK(a == generate_process(script_for(order, 12, 7)));
    CHECK_FALSE(a == generate_process(script_for(order, 12, 8)));
  }
}

TEST_CASE("reveal is monotone and ends on the target") {
  for (auto order : {RevealOrder::Raster, RevealOrder::RandomPatch}) {
    const auto s = script_for(order, 17);
    const auto v = generate_process(s);
    CHECK(v.back().same_pixels(s.target));
    for (std::size_t i = 1; i < v.size(); ++i)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 24; ++x) {
          const bool before = v[i - 1].at(x, y) == s.target.at(x, y);
          const bool now = v[i].at(x, y) == s.target.at(x, y);
          CHECK((!before || now));
          CHECK((now || v[i].at(x, y) == 255));
        }
  }
}

TEST_CASE("mse profile of every order is non-increasing") {
  const MseBackend mse;
  for (auto order : {RevealOrder::Raster, RevealOrder::RandomPatch, RevealOrder::CoarseToFine}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto s = script_for(order, 25, seed);
      s.target = procedural_target(32, 24, 3, seed);
      const auto v = generate_process(s);
      CHECK(v.back().same_pixels(s.target));
      const auto p = compute_profile(v, s.target, mse);
      for (std::size_t i = 1; i < p.size(); ++i) CHECK(p.values[i] <= p.values[i - 1] + 1e-15);
      CHECK(p.values.back() == 0.0);
    }
  }
}

TEST_CASE("coarse-to-fine shows a blurred target first") {
  // 16 + 64 + 256 + 1024 units over 85 steps: the first frame applies exactly
  // the 16 blocks of the coarsest level.
  auto s = script_for(RevealOrder::CoarseToFine, 85, 3);
  s.target = procedural_target(32, 32, 1, 5);
  const auto v = generate_process(s);
  bool blocky = true;
  for (int by = 0; by < 32; by += 8)
    for (int bx = 0; bx < 32; bx += 8)
      for (int y = by; y < by + 8; ++y)
        for (int x = bx; x < bx + 8; ++x) blocky = blocky && v[0].at(x, y) == v[0].at(bx, by);
  CHECK(blocky);
  CHECK(v.back().same_pixels(s.target));
}

TEST_CASE("steps beyond the unit count are clamped") {
  RevealScript s;
  s.target = procedural_target(3, 2, 3, 1);
  s.steps = 50;
  const auto v = generate_process(s);
  CHECK(v.size() == 6);
  CHECK(v.back().same_pixels(s.target));
}

TEST_CASE("overlay_occluder stamps masks and boxes") {
  auto s = script_for(RevealOrder::Raster, 3);
  const auto clean = generate_process(s);
  const auto none = overlay_occluder(clean, s);
  CHECK(none.frames == clean);
  REQUIRE(none.masks.size() == clean.size());
  for (const auto &m : none.masks) CHECK(m.count() == 0);
  CHECK(none.detections.frames.empty());

  Occluder occ;
  occ.trajectory = {{0, 0}, {30, 30}, {-5, 4}};
  s.occluder = occ;
  const auto o = overlay_occluder(clean, s);
  REQUIRE(o.masks.size() == 3);
  CHECK(o.masks[0].count() == 64);
  CHECK(o.masks[0].at(7, 7));
  CHECK_FALSE(o.masks[0].at(8, 0));
  CHECK(o.frames[0].at(3, 3, 0) == 255);
  CHECK(o.frames[0].at(3, 3, 1) == 0);
  // Clamped into the 24x16 frame.
  CHECK(o.detections.frames[1].detections[0].box == PixelRect{16, 8, 24, 16});
  CHECK(o.detections.frames[2].detections[0].box == PixelRect{0, 4, 8, 12});
  CHECK(o.detections.frames[0].detections[0].label == "hand");
  CHECK(o.detections.frames[0].detections[0].score == 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 24; ++x)
        if (!o.masks[i].at(x, y)) CHECK(o.frames[i].at(x, y, 2) == clean[i].at(x, y, 2));

  s.occluder->trajectory.pop_back();
  CHECK_THROWS(overlay_occluder(clean, s));
}

TEST_CASE("sweep trajectory endpoints") {
  const auto t = sweep_trajectory({0, 10}, {40, 30}, 5);
  REQUIRE(t.size() == 5);
  CHECK(t.front() == std::pair{0, 10});
  CHECK(t.back() == std::pair{40, 30});
  CHECK(t[2] == std::pair{20, 20});
  CHECK(sweep_trajectory({3, 4}, {9, 9}, 1) == std::vector<std::pair<int, int>>{{3, 4}});
}

TEST_CASE("realize_profile hits the requested distances") {
  const std::vector<double> values{1.0, 0.731, 0.25, 0.0123, 0.0};
  const auto v = realize_profile(values, 30, 20);
  const auto black = Frame::filled(30, 20, 1, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(std::abs(mse_distance(v[i], black) - values[i]) <= 0.5 / 600 + 1e-15);
  }
  const std::vector<double> bad{1.5};
  CHECK_THROWS(realize_profile(bad, 4, 4));
}

TEST_CASE("reveal script validation") {
  auto s = script_for(RevealOrder::Raster, 0);
  CHECK_THROWS(s.validate());
  CHECK(parse_reveal_order("coarse-to-fine") == RevealOrder::CoarseToFine);
  CHECK(to_string(RevealOrder::RandomPatch) == "random-patch");
  CHECK_THROWS(parse_reveal_order("spiral"));
}
