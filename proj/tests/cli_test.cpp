#include "pb/cli.hpp"
#include "pb/io.hpp"
#include "pb/pdp.hpp"
#include "pb/plot.hpp"
#include "pb/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <regex>
#include <sstream>

using namespace pb;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::pair<double, double>>> polylines(const std::string &svg) {
  std::vector<std::vector<std::pair<double, double>>> lines;
  const std::regex line_re("<polyline[^>]*points=\"([^\"]*)\"");
  const std::regex pt_re("([-0-9.]+),([-0-9.]+)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line_re); it != std::sregex_iterator(); ++it) {
    const std::string pts = (*it)[1];
    std::vector<std::pair<double, double>> line;
    for (auto p = std::sregex_iterator(pts.begin(), pts.end(), pt_re); p != std::sregex_iterator(); ++p) {
      line.emplace_back(std::stod((*p)[1]), std::stod((*p)[2]));
    }
    lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path &p, const std::string &s) { write_file_atomic(p, std::string_view(s)); }

fs::path write_script(const fs::path &dir, const std::string &body) {
  const auto p = dir / "script.json";
  write_text(p, body);
  return p;
}

const char *kOccluderScript = R"({
  "target": {"width": 48, "height": 32, "channels": 3, "seed": 5},
  "order": "random-patch", "steps": 180, "seed": 3, "fps": 3,
  "occluder": {"size": 8, "sweep": {"from": [0, 4], "to": [40, 24]}}
})";

} // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"pdp", "--n-points", "1", "--gt", "a", "--gen", "b"}).code == 2);
  CHECK(cli({"pdp", "--help"}).code == 0);
}

TEST_CASE("synth writes frames deterministically") {
  const auto dir = pbtest::scratch_dir("cli_synth");
  const auto script = write_script(dir, R"({"target":{"width":16,"height":12,"seed":1},"order":"coarse-to-fine","steps":30,"seed":4})");
  REQUIRE(cli({"synth", "--script", script.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"synth", "--script", script.string(), "--out", (dir / "b").string()}).code == 0);
  const auto files = list_image_files(dir / "a" / "frames");
  CHECK(files.size() == 30);
  for (const auto &f : files) CHECK(read_file_bytes(f) == read_file_bytes(dir / "b" / "frames" / f.filename()));
  CHECK_FALSE(fs::exists(dir / "a" / "masks"));

  REQUIRE(cli({"synth", "--script", script.string(), "--out", (dir / "raw").string(), "--format", "raw"}).code == 0);
  CHECK(load_sequence(dir / "raw" / "frames.pbseq") == load_sequence(dir / "a" / "frames"));
}

TEST_CASE("synth with an occluder writes three artifact sets") {
  const auto dir = pbtest::scratch_dir("cli_synth_occ");
  const auto script = write_script(dir, kOccluderScript);
  REQUIRE(cli({"synth", "--script", script.string(), "--out", (dir / "o").string()}).code == 0);
  CHECK(list_image_files(dir / "o" / "frames").size() == 180);
  CHECK(list_image_files(dir / "o" / "masks").size() == 180);
  CHECK(read_detections(dir / "o" / "detections.json").frames.size() == 180);
}

TEST_CASE("synth schema violations name the field") {
  const auto dir = pbtest::scratch_dir("cli_synth_bad");
  auto run = [&](const std::string &body) {
    return cli({"synth", "--script", write_script(dir, body).string(), "--out", (dir / "x").string()});
  };
  auto r = run(R"({"target":{"width":8,"height":8},"steps":0})");
  CHECK(r.code == 2);
  CHECK(r.err.find("steps") != std::string::npos);
  r = run(R"({"target":{"width":8,"height":8},"steps":3,"colour":1})");
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
  r = run(R"({"target":{"width":8,"height":8},"steps":3,"order":"spiral"})");
  CHECK(r.code == 2);
  CHECK(r.err.find("order") != std::string::npos);
  r = run(R"({"target":{"width":8,"height":8},"steps":2,"occluder":{"size":2,"trajectory":[[0,0]]}})");
  CHECK(r.code == 2);
  CHECK(r.err.find("trajectory") != std::string::npos);
  r = run(R"({"steps":2})");
  CHECK(r.code == 2);
  CHECK(r.err.find("target") != std::string::npos);
}

TEST_CASE("curate end to end through the command line") {
  const auto dir = pbtest::scratch_dir("cli_curate");
  REQUIRE(cli({"synth", "--script", write_script(dir, kOccluderScript).string(), "--out", (dir / "s").string()}).code == 0);
  auto det = read_detections(dir / "s" / "detections.json");
  for (auto &fd : det.frames) fd.detections.push_back({"canvas", {0, 0, 48, 32}, 0.9});
  write_detections(det, dir / "det.json");

  const auto r = cli({"curate", "--frames", (dir / "s" / "frames").string(), "--detections", (dir / "det.json").string(),
                      "--masks", (dir / "s" / "masks").string(), "--out", (dir / "c").string()});
  REQUIRE(r.code == 0);
  const auto keys = load_sequence(dir / "c" / "keyframes");
  CHECK(keys.size() == 6);
  const auto manifest = nlohmann::json::parse(read_file_text(dir / "c" / "manifest.json"));
  CHECK(manifest["keyframe_count"] == 6);
  CHECK(manifest["segments"].size() == 6);

  REQUIRE(cli({"curate", "--frames", (dir / "s" / "frames").string(), "--detections", (dir / "det.json").string(),
               "--masks", (dir / "s" / "masks").string(), "--out", (dir / "rev").string(), "--reverse"})
              .code == 0);
  const auto rev = load_sequence(dir / "rev" / "keyframes");
  for (std::size_t k = 0; k < 6; ++k) CHECK(rev[k].same_pixels(keys[5 - k]));

  const auto missing = cli({"curate", "--frames", (dir / "s" / "frames").string(), "--detections",
                            (dir / "nope.json").string(), "--out", (dir / "m").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("detections not found") != std::string::npos);

  // No hand detections: the trim stage fails and is named.
  write_text(dir / "empty.json", R"({"frames":[]})");
  const auto stage = cli({"curate", "--frames", (dir / "s" / "frames").string(), "--detections",
                          (dir / "empty.json").string(), "--out", (dir / "e").string()});
  CHECK(stage.code == 1);
  CHECK(stage.err.find("trim") != std::string::npos);
}

TEST_CASE("config file values apply and flags win") {
  const auto dir = pbtest::scratch_dir("cli_config");
  REQUIRE(cli({"synth", "--script", write_script(dir, kOccluderScript).string(), "--out", (dir / "s").string()}).code == 0);
  auto det = read_detections(dir / "s" / "detections.json");
  for (auto &fd : det.frames) fd.detections.push_back({"canvas", {0, 0, 48, 32}, 0.9});
  write_detections(det, dir / "det.json");
  write_text(dir / "cfg.json", R"({"segment_seconds": 20, "reverse": false, "masks": ")" +
                                   (dir / "s" / "masks").generic_string() + "\"}");
  REQUIRE(cli({"curate", "--config", (dir / "cfg.json").string(), "--frames", (dir / "s" / "frames").string(),
               "--detections", (dir / "det.json").string(), "--out", (dir / "a").string()})
              .code == 0);
  CHECK(load_sequence(dir / "a" / "keyframes").size() == 3);
  REQUIRE(cli({"curate", "--config", (dir / "cfg.json").string(), "--segment-seconds", "30", "--frames",
               (dir / "s" / "frames").string(), "--detections", (dir / "det.json").string(), "--out",
               (dir / "b").string()})
              .code == 0);
  CHECK(load_sequence(dir / "b" / "keyframes").size() == 2);

  write_text(dir / "bad.json", R"({"segment_secs": 20})");
  const auto r = cli({"curate", "--config", (dir / "bad.json").string(), "--frames", "x", "--detections", "y",
                      "--out", "z"});
  CHECK(r.code == 2);
  CHECK(r.err.find("segment_secs") != std::string::npos);
}

TEST_CASE("pdp command prints scores and writes profiles") {
  const auto dir = pbtest::scratch_dir("cli_pdp");
  const auto script = write_script(dir, R"({"target":{"width":16,"height":12,"seed":1},"order":"raster","steps":12})");
  REQUIRE(cli({"synth", "--script", script.string(), "--out", (dir / "s").string()}).code == 0);
  const auto frames = (dir / "s" / "frames").string();
  const auto same = cli({"pdp", "--gt", frames, "--gen", frames, "--out-dir", (dir / "p").string(), "--plot",
                         (dir / "p.svg").string()});
  REQUIRE(same.code == 0);
  CHECK(same.out == "pdp 0\npdp_norm 0\nfinal_distance 0\n");
  const auto curve = parse_profile_csv(read_file_text(dir / "p" / "gt_curve.csv"));
  CHECK(curve.size() == 200);
  CHECK(polylines(read_file_text(dir / "p.svg")).size() == 2);

  // Analytic pair 1 - t against (1 - t)^2.
  std::vector<double> f(201), g(201);
  for (std::size_t i = 0; i <= 200; ++i) {
    const double t = i / 200.0;
    f[i] = 1 - t;
    g[i] = (1 - t) * (1 - t);
  }
  save_sequence(realize_profile(f, 200, 200), dir / "gt.pbseq", SequenceFormat::Raw);
  save_sequence(realize_profile(g, 200, 200), dir / "gen.pbseq", SequenceFormat::Raw);
  const auto analytic = cli({"pdp", "--gt", (dir / "gt.pbseq").string(), "--gen", (dir / "gen.pbseq").string()});
  REQUIRE(analytic.code == 0);
  const double pdp = std::stod(analytic.out.substr(4));
  CHECK(std::abs(pdp - std::sqrt(1.0 / 30.0)) < 1e-3);

  const auto batch = dir / "batch.csv";
  write_text(batch, "id,gt,gen\none,gt.pbseq,gen.pbseq\ntwo,gt.pbseq,gt.pbseq\nthree,gen.pbseq,gen.pbseq\n");
  const auto b = cli({"pdp", "--batch", batch.string()});
  REQUIRE(b.code == 0);
  std::istringstream lines(b.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 5);
  CHECK(rows[2].rfind("two,0,0,0", 0) == 0);
  CHECK(rows[4].rfind("mean,", 0) == 0);

  const auto empty_dir = pbtest::scratch_dir("cli_pdp_empty");
  CHECK(cli({"pdp", "--gt", empty_dir.string(), "--gen", frames}).code == 2);

  write_text(dir / "gt_scores.csv", "index,distance\n0,1\n1,0.5\n2,0\n");
  write_text(dir / "gen_scores.csv", "index,distance\n0,1\n1,0.5\n2,0\n");
  const auto scored = cli({"pdp", "--gt-scores", (dir / "gt_scores.csv").string(), "--gen-scores",
                           (dir / "gen_scores.csv").string()});
  CHECK(scored.code == 0);
  CHECK(scored.out.rfind("pdp 0\n", 0) == 0);
}

TEST_CASE("pdp with an embedding backend") {
  const auto dir = pbtest::scratch_dir("cli_pdp_emb");
  std::mt19937_64 rng(60);
  const auto seq = pbtest::random_sequence(rng, 3, 4, 4, 3);
  save_sequence(seq, dir / "v.pbseq", SequenceFormat::Raw);
  write_embeddings(EmbeddingSet{"dino", 2, {{1, 0}, {0, 1}, {1, 0.001}}}, dir / "e.txt");
  const auto r = cli({"pdp", "--backend", "embedding", "--gt", (dir / "v.pbseq").string(), "--gen",
                      (dir / "v.pbseq").string(), "--gt-embeddings", (dir / "e.txt").string(), "--gen-embeddings",
                      (dir / "e.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("pdp 0\n", 0) == 0);
}

TEST_CASE("eval command report") {
  const auto dir = pbtest::scratch_dir("cli_eval");
  std::mt19937_64 rng(61);
  fs::create_directories(dir / "gen");
  fs::create_directories(dir / "gt");
  for (const char *id : {"a", "b"}) {
    const auto v = pbtest::random_sequence(rng, 4, 6, 6, 3);
    save_sequence(v, dir / "gen" / (std::string(id) + ".pbseq"), SequenceFormat::Raw);
    save_sequence(v, dir / "gt" / (std::string(id) + ".pbseq"), SequenceFormat::Raw);
  }
  write_embeddings(EmbeddingSet{"m", 2, {{0, 1}, {2, 0}, {1, 1}}}, dir / "emb.txt");
  const auto r = cli({"eval", "--gen-root", (dir / "gen").string(), "--gt-root", (dir / "gt").string(), "--fid-gen",
                      (dir / "emb.txt").string(), "--fid-gt", (dir / "emb.txt").string(), "--report",
                      (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read_file_text(dir / "report.json"));
  REQUIRE(j["videos"].size() == 2);
  for (const auto &v : j["videos"]) {
    CHECK(v["metrics"]["mse"] == 0.0);
    CHECK(v["metrics"]["pdp"] == 0.0);
    CHECK(v["metrics"]["pdp_norm"] == 0.0);
    CHECK(v["metrics"]["final_distance"] == 0.0);
  }
  CHECK(j["aggregate"]["mse"] == 0.0);
  CHECK(std::abs(j["fid"].get<double>()) < 1e-8);

  save_sequence(pbtest::random_sequence(rng, 2, 6, 6, 3), dir / "gen" / "orphan.pbseq", SequenceFormat::Raw);
  const auto o = cli({"eval", "--gen-root", (dir / "gen").string(), "--gt-root", (dir / "gt").string()});
  CHECK(o.code == 2);
  CHECK(o.err.find("orphan") != std::string::npos);
}

TEST_CASE("eval mode flag changes matches") {
  const auto dir = pbtest::scratch_dir("cli_eval_mode");
  fs::create_directories(dir / "gen");
  fs::create_directories(dir / "gt");
  // gt: dark -> light; gen visits a dark frame after a light one.
  auto f = [](std::uint8_t v) { return Frame::filled(4, 4, 1, v); };
  save_sequence(FrameSequence::from_frames({f(0), f(100), f(200), f(255)}, Rational(1)), dir / "gt" / "x.pbseq",
                SequenceFormat::Raw);
  save_sequence(FrameSequence::from_frames({f(0), f(200), f(10), f(255)}, Rational(1)), dir / "gen" / "x.pbseq",
                SequenceFormat::Raw);
  auto matches = [&](const std::string &mode) {
    const auto r = cli({"eval", "--gen-root", (dir / "gen").string(), "--gt-root", (dir / "gt").string(), "--mode", mode});
    REQUIRE(r.code == 0);
    return nlohmann::json::parse(r.out)["videos"][0]["matches"];
  };
  const auto near = matches("nearest"), mono = matches("monotone");
  CHECK(near[2][1] == 0);
  CHECK(mono[2][1] == 1);
  CHECK(mono[1][1] == 1);
}

TEST_CASE("plot command") {
  const auto dir = pbtest::scratch_dir("cli_plot");
  std::vector<std::string> csvs;
  for (int i = 0; i < 3; ++i) {
    const auto p = dir / ("p" + std::to_string(i) + ".csv");
    write_text(p, format_profile_csv(DistanceProfile::from_values({0.9 - 0.1 * i, 0.5, 0.2 + 0.05 * i})));
    csvs.push_back(p.string());
  }
  auto one = cli({"plot", csvs[0], "--out", (dir / "one.svg").string()});
  REQUIRE(one.code == 0);
  const auto svg = read_file_text(dir / "one.svg");
  CHECK(polylines(svg).size() == 1);
  CHECK(svg.find(">Time<") != std::string::npos);

  auto mean = cli({"plot", csvs[0], csvs[1], csvs[2], "--mean", "--out", (dir / "mean.svg").string()});
  REQUIRE(mean.code == 0);
  CHECK(polylines(read_file_text(dir / "mean.svg")).size() == 4);

  REQUIRE(cli({"plot", csvs[0], csvs[1], "--normalize", "--out", (dir / "norm.svg").string()}).code == 0);
  PlotOptions opts;
  const auto area = plot_area(opts);
  for (const auto &line : polylines(read_file_text(dir / "norm.svg"))) {
    CHECK(line.front().first == doctest::Approx(area.left));
    CHECK(line.front().second == doctest::Approx(area.top));
    CHECK(line.back().first == doctest::Approx(area.right));
    CHECK(line.back().second == doctest::Approx(area.bottom));
  }

  write_text(dir / "bad.csv", "t,value\n0,1\n0.5,oops\n1,0\n");
  const auto bad = cli({"plot", (dir / "bad.csv").string(), "--out", (dir / "bad.svg").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("row 3") != std::string::npos);
  CHECK(cli({"plot", "--out", (dir / "none.svg").string()}).code == 2);
}
