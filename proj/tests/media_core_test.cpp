#include "pb/errors.hpp"
#include "pb/frame.hpp"
#include "pb/io.hpp"
#include "pb/rational.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace pb;

TEST_CASE("rational arithmetic stays exact") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, 3) + Rational(2, 3) == Rational(1));
  CHECK(Rational(29, 3) * Rational(3) == Rational(29));
  CHECK(Rational(-1, 2).floor() == -1);
  CHECK(Rational(7, 2).ceil() == 4);
  CHECK(Rational(10).ceil() == 10);
  CHECK(Rational::parse("30000/1001") == Rational(30000, 1001));
  CHECK(Rational::parse("29.97") == Rational(2997, 100));
  CHECK(Rational::parse("3") == Rational(3));
  CHECK(Rational(6, 4).str() == "3/2");
  CHECK_THROWS(Rational::parse("abc"));
  CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("to_grayscale uses rounded BT.601 luma") {
  auto px = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return to_grayscale(Frame(1, 1, 3, {r, g, b})).at(0, 0);
  };
  CHECK(px(255, 255, 255) == 255);
  CHECK(px(0, 0, 0) == 0);
  // 0.299 * 255 = 76.245
  CHECK(px(255, 0, 0) == 76);

  std::mt19937_64 rng(1);
  const auto g = to_grayscale(pbtest::random_frame(rng, 7, 5, 3));
  CHECK(g.channels() == 1);
  CHECK(to_grayscale(g) == g);
}

TEST_CASE("crop copies the box verbatim") {
  std::mt19937_64 rng(2);
  const auto f = pbtest::random_frame(rng, 32, 32, 3);
  CHECK(crop(f, {0, 0, 32, 32}).same_pixels(f));
  const auto one = crop(f, {0, 0, 1, 1});
  CHECK(one.width() == 1);
  CHECK(one.height() == 1);
  CHECK(one.at(0, 0, 2) == f.at(0, 0, 2));
  const auto box = crop(f, {10, 0, 20, 5});
  CHECK(box.width() == 10);
  CHECK(box.height() == 5);
  CHECK(box.at(3, 4, 1) == f.at(13, 4, 1));
  CHECK_THROWS_AS(crop(f, {30, 0, 33, 4}), RangeError);
  CHECK_THROWS_AS(crop(f, {4, 4, 4, 8}), RangeError);
}

TEST_CASE("crop of crop equals crop of the composed box") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 1000);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = pbtest::random_frame(rng, 24, 18, trial % 2 ? 1 : 3);
    const int x0 = u(rng) % 12, y0 = u(rng) % 9;
    const PixelRect outer{x0, y0, x0 + 1 + u(rng) % (24 - x0), y0 + 1 + u(rng) % (18 - y0)};
    const int iw = outer.width(), ih = outer.height();
    const int a0 = u(rng) % iw, b0 = u(rng) % ih;
    const PixelRect inner{a0, b0, a0 + 1 + u(rng) % (iw - a0), b0 + 1 + u(rng) % (ih - b0)};
    const PixelRect composed{x0 + inner.x0, y0 + inner.y0, x0 + inner.x1, y0 + inner.y1};
    CHECK(crop(crop(f, outer), inner).same_pixels(crop(f, composed)));
  }
}

TEST_CASE("resize_bilinear keeps constant frames constant") {
  const auto f = Frame::filled(9, 7, 3, 77);
  const auto r = resize_bilinear(f, 4, 3);
  CHECK(r.width() == 4);
  CHECK(r.same_pixels(Frame::filled(4, 3, 3, 77)));
  std::mt19937_64 rng(4);
  const auto g = pbtest::random_frame(rng, 6, 5, 1);
  CHECK(resize_bilinear(g, 6, 5).same_pixels(g));
}

TEST_CASE("frame sequences enforce shape and ordering") {
  std::vector<Frame> mixed{Frame::filled(4, 4, 3, 0), Frame::filled(5, 4, 3, 0)};
  CHECK_THROWS_AS(FrameSequence::from_frames(mixed, Rational(3)), StructureError);
  std::vector<Frame> unordered{Frame::filled(2, 2, 1, 0, Rational(1)), Frame::filled(2, 2, 1, 0, Rational(1))};
  CHECK_THROWS_AS(FrameSequence(unordered, Rational(1)), StructureError);
  CHECK_THROWS_AS(Frame(2, 2, 2, std::vector<std::uint8_t>(8)), StructureError);
  CHECK_THROWS_AS(Frame(2, 2, 3, std::vector<std::uint8_t>(11)), StructureError);

  std::mt19937_64 rng(5);
  const auto seq = pbtest::random_sequence(rng, 30, 4, 4, 3, Rational(3));
  CHECK(seq[29].timestamp() == Rational(29, 3));
  CHECK(seq.duration() == Rational(10));
}

TEST_CASE("directory of frames loads with declared fps") {
  const auto dir = pbtest::scratch_dir("load_dir");
  std::mt19937_64 rng(6);
  const auto seq = pbtest::random_sequence(rng, 30, 5, 4, 3, Rational(3));
  for (std::size_t i = 0; i < seq.size(); ++i) write_image(seq[i], dir / frame_filename("frame_", i));
  const auto loaded = load_sequence(dir, Rational(3));
  REQUIRE(loaded.size() == 30);
  CHECK(loaded[0].timestamp() == Rational(0));
  CHECK(loaded[1].timestamp() == Rational(1, 3));
  CHECK(loaded[29].timestamp() == Rational(29, 3));
  for (std::size_t i = 0; i < seq.size(); ++i) CHECK(loaded[i].same_pixels(seq[i]));
}

TEST_CASE("load_sequence failure modes") {
  const auto empty = pbtest::scratch_dir("load_empty");
  try {
    load_sequence(empty);
    FAIL("expected an error");
  } catch (const LoadError &e) {
    CHECK(std::string(e.what()).find("no frames") != std::string::npos);
  }

  const auto mixed = pbtest::scratch_dir("load_mixed");
  write_image(Frame::filled(4, 4, 3, 9), mixed / "frame_000000.png");
  write_image(Frame::filled(6, 4, 3, 9), mixed / "frame_000001.png");
  CHECK_THROWS_AS(load_sequence(mixed), StructureError);

  const auto corrupt = pbtest::scratch_dir("load_corrupt");
  write_image(Frame::filled(4, 4, 3, 9), corrupt / "frame_000000.png");
  write_file_atomic(corrupt / "frame_000001.png", std::string_view("not a png"));
  try {
    load_sequence(corrupt);
    FAIL("expected an error");
  } catch (const LoadError &e) {
    CHECK(e.frame() == std::optional<std::size_t>(1));
  }
}

TEST_CASE("frame files sort naturally") {
  const auto dir = pbtest::scratch_dir("natural");
  for (int i : {10, 2, 1}) write_image(Frame::filled(2, 2, 1, static_cast<std::uint8_t>(i)), dir / ("f" + std::to_string(i) + ".png"));
  const auto seq = load_sequence(dir);
  CHECK(seq[0].at(0, 0) == 1);
  CHECK(seq[1].at(0, 0) == 2);
  CHECK(seq[2].at(0, 0) == 10);
  CHECK(seq.fps() == Rational(1));
}

TEST_CASE("raw container round trip is pixel exact") {
  std::mt19937_64 rng(7);
  const auto dir = pbtest::scratch_dir("container");
  for (int c : {1, 3}) {
    const auto seq = pbtest::random_sequence(rng, 5, 7, 3, c, Rational(30000, 1001));
    const auto path = dir / ("seq" + std::to_string(c) + ".pbseq");
    save_sequence(seq, path, SequenceFormat::Raw);
    const auto back = load_sequence(path);
    CHECK(back == seq);
    const auto bytes = encode_container(seq);
    CHECK(bytes.size() == 35 + 5 * 7 * 3 * static_cast<std::size_t>(c));
    CHECK(std::string(bytes.begin(), bytes.begin() + 6) == "PBSEQ1");
  }
  const auto bytes = encode_container(pbtest::random_sequence(rng, 2, 3, 3, 3));
  CHECK_THROWS_AS(decode_container(std::span(bytes).first(bytes.size() - 1)), LoadError);
}

TEST_CASE("directory save keeps fps metadata") {
  std::mt19937_64 rng(8);
  const auto seq = pbtest::random_sequence(rng, 4, 6, 5, 3, Rational(5, 2));
  const auto dir = pbtest::scratch_dir("save_dir") / "frames";
  save_sequence(seq, dir);
  CHECK(load_sequence(dir) == seq);
}

TEST_CASE("png and netpbm images round trip") {
  std::mt19937_64 rng(9);
  const auto dir = pbtest::scratch_dir("images");
  for (int c : {1, 3}) {
    const auto f = pbtest::random_frame(rng, 11, 6, c);
    CHECK(decode_png(encode_png(f)).same_pixels(f));
    const auto path = dir / (c == 1 ? "x.pgm" : "x.ppm");
    write_image(f, path);
    CHECK(read_image(path).same_pixels(f));
  }
}

TEST_CASE("masks threshold at 128") {
  const auto dir = pbtest::scratch_dir("masks");
  write_image(Frame(3, 1, 1, {0, 127, 128}), dir / "m.png");
  const auto m = read_mask(dir / "m.png");
  CHECK_FALSE(m.at(0, 0));
  CHECK_FALSE(m.at(1, 0));
  CHECK(m.at(2, 0));

  std::mt19937_64 rng(10);
  std::vector<OcclusionMask> masks{pbtest::random_mask(rng, 5, 4, 0.3), pbtest::random_mask(rng, 5, 4, 0.6)};
  save_masks(masks, dir / "set");
  CHECK(load_masks(dir / "set") == masks);
}

TEST_CASE("detection files round trip") {
  const std::string text =
      R"({"frames":[{"index":0,"detections":[{"label":"hand","box":[1,2,5,6],"score":0.93}]},)"
      R"({"index":4,"detections":[]}]})";
  const auto det = parse_detections(text);
  REQUIRE(det.frames.size() == 2);
  CHECK(det.at(0)[0].box == PixelRect{1, 2, 5, 6});
  CHECK(det.at(0)[0].score == doctest::Approx(0.93));
  CHECK(det.at(3).empty());
  CHECK(parse_detections(format_detections(det)) == det);
  CHECK_THROWS_AS(parse_detections(R"({"frames":[{"index":0,"detections":[{"label":"x","box":[1,2],"score":1}]}]})"),
                  LoadError);
  CHECK_THROWS_AS(det.validate(4, 4), StructureError);
  CHECK_NOTHROW(det.validate(8, 8));
}

TEST_CASE("embedding files round trip bit exactly") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  EmbeddingSet es{"clip", 5, {}};
  for (int i = 0; i < 6; ++i) {
    std::vector<double> v(5);
    for (auto &x : v) x = n(rng) * 1e3;
    es.vectors.push_back(v);
  }
  const auto back = parse_embeddings(format_embeddings(es));
  CHECK(back.model_id == "clip");
  CHECK(back.dimension == 5);
  CHECK(back.vectors == es.vectors);
  CHECK_THROWS_AS(parse_embeddings("dim=2 count=2 model=a\n1 2\n3\n"), LoadError);
}
