#include "pb/cli.hpp"

#include "pb/backends.hpp"
#include "pb/curate.hpp"
#include "pb/errors.hpp"
#include "pb/eval.hpp"
#include "pb/io.hpp"
#include "pb/parallel.hpp"
#include "pb/pdp.hpp"
#include "pb/plot.hpp"
#include "pb/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

namespace pb {

namespace {

using nlohmann::json;

// Bad arguments, missing inputs or schema violations (exit status 2).
class UsageError : public Error {
public:
  using Error::Error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct CurateOptions {
  std::string frames, fps, detections, masks, out, canvas_mode = "detector", trim_label = "hand";
  std::string segment_seconds = "10", sample_fps = "3", inpaint_cmd;
  std::size_t samples = 30;
  double threshold = 0.35;
  std::vector<double> band{0.2, 0.8};
  bool reverse = false;
};

struct PdpOptions {
  std::string gt, gen, batch, backend = "mse", gt_embeddings, gen_embeddings, gt_scores, gen_scores;
  std::string out_dir, plot, y_label;
  std::size_t n_points = 200;
  bool normalize = false;
};

struct EvalOptions {
  std::string gen_root, gt_root, backend = "mse", mode = "monotone", report;
  std::vector<std::string> fid_gen, fid_gt;
  std::size_t n_points = 200;
};

struct SynthOptions {
  std::string script, out, format = "dir";
};

struct PlotOptionsCli {
  std::vector<std::string> inputs, labels;
  std::string out, x_label = "Time", y_label = "distance", title;
  int width = 640, height = 400;
  std::size_t n_points = 200;
  bool mean = false, normalize = false;
};

struct Options {
  std::string config;
  std::size_t jobs = default_jobs();
  CurateOptions curate;
  PdpOptions pdp;
  EvalOptions eval;
  SynthOptions synth;
  PlotOptionsCli plot;
};

void build_app(CLI::App &app, Options &o) {
  app.require_subcommand(1);
  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", o.config, "JSON file with option values; flags win on conflict");
    sub->add_option("--jobs", o.jobs, "Worker threads (default: PB_JOBS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
  };

  auto *curate = app.add_subcommand("curate", "Extract occlusion-free keyframes from a painting video");
  common(curate);
  curate->add_option("--frames", o.curate.frames, "Frame directory or PBSEQ1 container");
  curate->add_option("--fps", o.curate.fps, "Frame rate of the input (overrides metadata)");
  curate->add_option("--detections", o.curate.detections, "Detection JSON");
  curate->add_option("--masks", o.curate.masks, "Directory of per-frame occlusion masks");
  curate->add_option("--out", o.curate.out, "Output directory");
  curate->add_flag("--reverse", o.curate.reverse, "Emit keyframes in reverse order");
  curate->add_option("--canvas-mode", o.curate.canvas_mode, "detector or gradient-split");
  curate->add_option("--threshold", o.curate.threshold, "Detection score threshold");
  curate->add_option("--trim-label", o.curate.trim_label, "Label marking artist activity");
  curate->add_option("--segment-seconds", o.curate.segment_seconds, "Segment length in seconds");
  curate->add_option("--sample-fps", o.curate.sample_fps, "Sampling rate inside a segment");
  curate->add_option("--samples", o.curate.samples, "Samples per segment")->check(CLI::PositiveNumber);
  curate->add_option("--band", o.curate.band, "Gradient-split search band as two width fractions")
      ->expected(2)
      ->delimiter(',');
  curate->add_option("--inpaint-cmd", o.curate.inpaint_cmd, "External inpainter command");

  auto *pdp = app.add_subcommand("pdp", "Perceptual distance profile score between two sequences");
  common(pdp);
  pdp->add_option("--gt", o.pdp.gt, "Ground-truth sequence");
  pdp->add_option("--gen", o.pdp.gen, "Generated sequence");
  pdp->add_option("--batch", o.pdp.batch, "CSV of id,gt,gen rows");
  pdp->add_option("--backend", o.pdp.backend, "mse, ssim, gram or embedding");
  pdp->add_option("--gt-embeddings", o.pdp.gt_embeddings, "Embeddings of the ground-truth frames");
  pdp->add_option("--gen-embeddings", o.pdp.gen_embeddings, "Embeddings of the generated frames");
  pdp->add_option("--gt-scores", o.pdp.gt_scores, "Pre-scored ground-truth profile (index,distance)");
  pdp->add_option("--gen-scores", o.pdp.gen_scores, "Pre-scored generated profile (index,distance)");
  pdp->add_option("--n-points", o.pdp.n_points, "Resampling points")->check(CLI::Range(2, 10000000));
  pdp->add_flag("--normalize", o.pdp.normalize, "Write and plot normalized curves");
  pdp->add_option("--out-dir", o.pdp.out_dir, "Directory for profile CSVs");
  pdp->add_option("--plot", o.pdp.plot, "SVG chart of both curves");
  pdp->add_option("--y-label", o.pdp.y_label, "Chart y-axis label (default: backend id)");

  auto *eval = app.add_subcommand("eval", "Evaluate generated videos against ground truth");
  common(eval);
  eval->add_option("--gen-root", o.eval.gen_root, "Directory of generated sequences");
  eval->add_option("--gt-root", o.eval.gt_root, "Directory of ground-truth sequences");
  eval->add_option("--backend", o.eval.backend, "mse, ssim or gram");
  eval->add_option("--mode", o.eval.mode, "monotone or nearest frame matching");
  eval->add_option("--n-points", o.eval.n_points, "PDP resampling points")->check(CLI::Range(2, 10000000));
  eval->add_option("--fid-gen", o.eval.fid_gen, "Embedding files of generated frames");
  eval->add_option("--fid-gt", o.eval.fid_gt, "Embedding files of ground-truth frames");
  eval->add_option("--report", o.eval.report, "Write the JSON report here");

  auto *synth = app.add_subcommand("synth", "Generate a painting-process fixture from a script");
  common(synth);
  synth->add_option("--script", o.synth.script, "Script JSON");
  synth->add_option("--out", o.synth.out, "Output directory");
  synth->add_option("--format", o.synth.format, "dir or raw");

  auto *plot = app.add_subcommand("plot", "Plot profile CSVs as an SVG chart");
  common(plot);
  plot->add_option("inputs", o.plot.inputs, "Profile CSV files");
  plot->add_option("--out", o.plot.out, "Output SVG");
  plot->add_option("--labels", o.plot.labels, "Legend labels, one per input");
  plot->add_flag("--mean", o.plot.mean, "Overlay the mean curve");
  plot->add_flag("--normalize", o.plot.normalize, "Normalize profiles to run from 1 to 0");
  plot->add_option("--x-label", o.plot.x_label, "x-axis label");
  plot->add_option("--y-label", o.plot.y_label, "y-axis label");
  plot->add_option("--title", o.plot.title, "Chart title");
  plot->add_option("--width", o.plot.width, "Chart width in pixels");
  plot->add_option("--height", o.plot.height, "Chart height in pixels");
  plot->add_option("--n-points", o.plot.n_points, "Resampling points of the mean curve")
      ->check(CLI::Range(2, 10000000));
}

void parse(CLI::App &app, const std::vector<std::string> &args) {
  std::vector<const char *> argv{"pbtool"};
  for (const auto &a : args) argv.push_back(a.c_str());
  app.parse(static_cast<int>(argv.size()), argv.data());
}

// Turns config entries into command-line tokens for options the user did not
// set explicitly.
std::vector<std::string> config_tokens(CLI::App &sub, const std::string &path) {
  json cfg;
  try {
    cfg = json::parse(read_file_text(path));
  } catch (const json::exception &e) {
    throw UsageError("config '" + path + "': " + e.what());
  } catch (const LoadError &) {
    throw UsageError("config not found: " + path);
  }
  if (!cfg.is_object()) {
    throw UsageError("config '" + path + "' must hold a JSON object");
  }
  std::vector<std::string> tokens;
  for (const auto &[key, value] : cfg.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option *opt = name == "config" ? nullptr : sub.get_option_no_throw("--" + name);
    if (!opt) {
      throw UsageError("unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    auto scalar = [&](const json &v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number() || v.is_boolean()) return v.dump();
      throw UsageError("config key '" + key + "' has an unsupported value");
    };
    if (opt->get_expected_min() == 0) {
      if (!value.is_boolean()) throw UsageError("config key '" + key + "' must be true or false");
      if (value.get<bool>()) tokens.push_back("--" + name);
    } else if (value.is_array()) {
      tokens.push_back("--" + name);
      for (const auto &v : value) tokens.push_back(scalar(v));
    } else {
      tokens.push_back("--" + name);
      tokens.push_back(scalar(value));
    }
  }
  return tokens;
}

void require(const std::string &value, const std::string &flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

void require_exists(const std::string &path, const std::string &what) {
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

Rational parse_rational_arg(const std::string &s, const std::string &flag) {
  try {
    return Rational::parse(s);
  } catch (const Error &) {
    throw UsageError(flag + ": not a number '" + s + "'");
  }
}

// ---- curate ----------------------------------------------------------------

int cmd_curate(const Options &o, std::ostream &out) {
  const auto &c = o.curate;
  require(c.frames, "--frames");
  require(c.out, "--out");
  require(c.detections, "--detections");
  require_exists(c.frames, "frames");
  if (!fs::exists(c.detections)) throw UsageError("detections not found: " + c.detections);
  if (!c.masks.empty()) require_exists(c.masks, "masks");

  PipelineConfig cfg;
  cfg.segment_seconds = parse_rational_arg(c.segment_seconds, "--segment-seconds");
  cfg.sample_fps = parse_rational_arg(c.sample_fps, "--sample-fps");
  cfg.samples_per_segment = c.samples;
  cfg.trim_label = c.trim_label;
  cfg.detection_threshold = c.threshold;
  cfg.search_band = {c.band.at(0), c.band.at(1)};
  cfg.reverse = c.reverse;
  cfg.jobs = o.jobs;
  try {
    cfg.canvas_mode = parse_canvas_mode(c.canvas_mode);
    cfg.validate();
  } catch (const Error &e) {
    throw UsageError(e.what());
  }

  std::optional<Rational> fps;
  if (!c.fps.empty()) fps = parse_rational_arg(c.fps, "--fps");
  const auto video = load_sequence(c.frames, fps);
  const auto det = read_detections(c.detections);
  std::vector<OcclusionMask> masks;
  if (!c.masks.empty()) masks = load_masks(c.masks);

  Inpainter inpainter;
  if (!c.inpaint_cmd.empty()) {
    inpainter = ExternalInpainter{c.inpaint_cmd, fs::absolute(fs::path(c.out) / "inpaint")};
  }
  const auto result = run_pipeline(video, det, masks, cfg, inpainter);
  save_sequence(result.keyframes, fs::path(c.out) / "keyframes");
  write_file_atomic(fs::path(c.out) / "manifest.json", manifest_json(result, cfg).dump(2) + "\n");
  out << "keyframes " << result.keyframes.size() << "\n";
  out << "trim " << result.report.trim_start << " " << result.report.trim_end << "\n";
  const auto &b = result.report.canvas;
  out << "canvas " << b.x0 << " " << b.y0 << " " << b.x1 << " " << b.y1 << " (" << result.report.canvas_source
      << ")\n";
  return 0;
}

// ---- pdp -------------------------------------------------------------------

struct PdpRow {
  std::string id;
  PdpResult result;
};

PdpRow score_pair(const Options &o, const std::string &id, const std::string &gt_path, const std::string &gen_path) {
  const auto &p = o.pdp;
  PdpConfig cfg;
  cfg.n_points = p.n_points;
  cfg.normalize = p.normalize;
  cfg.distance_fn = p.backend;

  if (!p.gt_scores.empty() || !p.gen_scores.empty()) {
    require(p.gt_scores, "--gt-scores");
    require(p.gen_scores, "--gen-scores");
    require_exists(p.gt_scores, "score file");
    require_exists(p.gen_scores, "score file");
    return {id, pdp_from_profiles(parse_score_csv(read_file_text(p.gt_scores)),
                                  parse_score_csv(read_file_text(p.gen_scores)), cfg)};
  }
  require_exists(gt_path, "ground-truth sequence");
  require_exists(gen_path, "generated sequence");
  const auto gt = load_sequence(gt_path);
  const auto gen = load_sequence(gen_path);
  if (p.backend == "embedding") {
    require(p.gt_embeddings, "--gt-embeddings");
    require(p.gen_embeddings, "--gen-embeddings");
    const auto gt_emb = read_embeddings(p.gt_embeddings);
    const auto gen_emb = read_embeddings(p.gen_embeddings);
    EmbeddingBackend backend(gt_emb.model_id);
    backend.bind(gt, gt_emb);
    backend.bind(gen, gen_emb);
    return {id, pdp_score(gt, gen, cfg, backend, o.jobs)};
  }
  std::unique_ptr<DistanceBackend> backend;
  try {
    backend = make_backend(p.backend);
  } catch (const Error &e) {
    throw UsageError(e.what());
  }
  return {id, pdp_score(gt, gen, cfg, *backend, o.jobs)};
}

std::vector<std::array<std::string, 3>> read_batch(const std::string &path) {
  require_exists(path, "batch file");
  std::istringstream in(read_file_text(path));
  std::vector<std::array<std::string, 3>> rows;
  std::string line;
  std::size_t lineno = 0;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string &p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() == 3 && fields[0] == "id" && fields[1] == "gt") continue;
    if (fields.size() == 2) {
      rows.push_back({std::to_string(rows.size()), resolve(fields[0]), resolve(fields[1])});
    } else if (fields.size() == 3) {
      rows.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
    } else {
      throw UsageError("batch file row " + std::to_string(lineno) + ": expected id,gt,gen");
    }
  }
  if (rows.empty()) throw UsageError("batch file has no pairs");
  return rows;
}

void write_profiles(const fs::path &dir, const std::string &prefix, const PdpResult &r) {
  write_file_atomic(dir / (prefix + "gt_profile.csv"), format_profile_csv(r.profile_gt));
  write_file_atomic(dir / (prefix + "gen_profile.csv"), format_profile_csv(r.profile_gen));
  write_file_atomic(dir / (prefix + "gt_curve.csv"), format_profile_csv(r.curve_gt));
  write_file_atomic(dir / (prefix + "gen_curve.csv"), format_profile_csv(r.curve_gen));
}

int cmd_pdp(const Options &o, std::ostream &out) {
  const auto &p = o.pdp;
  const std::string y_label = p.y_label.empty() ? p.backend : p.y_label;
  PlotOptions plot_opts;
  plot_opts.y_label = p.normalize ? y_label + " (normalized)" : y_label;

  if (p.batch.empty()) {
    const bool scored = !p.gt_scores.empty() || !p.gen_scores.empty();
    if (!scored) {
      require(p.gt, "--gt");
      require(p.gen, "--gen");
    }
    const auto row = score_pair(o, "pair", p.gt, p.gen);
    out << "pdp " << fmt(row.result.pdp) << "\n";
    out << "pdp_norm " << fmt(row.result.pdp_norm) << "\n";
    out << "final_distance " << fmt(row.result.final_distance) << "\n";
    if (!p.out_dir.empty()) write_profiles(p.out_dir, "", row.result);
    if (!p.plot.empty()) {
      const std::vector<PlotSeries> series{{"ground truth", row.result.curve_gt},
                                           {"generated", row.result.curve_gen}};
      write_file_atomic(p.plot, render_svg(series, plot_opts));
    }
    return 0;
  }

  const auto pairs = read_batch(p.batch);
  std::vector<std::optional<PdpRow>> rows(pairs.size());
  Options inner = o;
  inner.jobs = 1;
  parallel_for(pairs.size(), o.jobs, [&](std::size_t i) {
    rows[i] = score_pair(inner, pairs[i][0], pairs[i][1], pairs[i][2]);
  });
  out << "id,pdp,pdp_norm,final_distance\n";
  double s_pdp = 0, s_norm = 0, s_final = 0;
  std::vector<DistanceProfile> gt_curves, gen_curves;
  for (const auto &r : rows) {
    out << r->id << "," << fmt(r->result.pdp) << "," << fmt(r->result.pdp_norm) << ","
        << fmt(r->result.final_distance) << "\n";
    s_pdp += r->result.pdp;
    s_norm += r->result.pdp_norm;
    s_final += r->result.final_distance;
    gt_curves.push_back(r->result.curve_gt);
    gen_curves.push_back(r->result.curve_gen);
    if (!p.out_dir.empty()) write_profiles(p.out_dir, r->id + "_", r->result);
  }
  const double n = static_cast<double>(rows.size());
  out << "mean," << fmt(s_pdp / n) << "," << fmt(s_norm / n) << "," << fmt(s_final / n) << "\n";
  if (!p.plot.empty()) {
    const std::vector<PlotSeries> series{{"ground truth (mean)", mean_profile(gt_curves, p.n_points)},
                                         {"generated (mean)", mean_profile(gen_curves, p.n_points)}};
    write_file_atomic(p.plot, render_svg(series, plot_opts));
  }
  return 0;
}

// ---- eval ------------------------------------------------------------------

std::map<std::string, fs::path> list_videos(const std::string &root) {
  require_exists(root, "video root");
  std::map<std::string, fs::path> videos;
  for (const auto &entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      videos[entry.path().filename().string()] = entry.path();
    } else if (entry.is_regular_file() && entry.path().extension() == ".pbseq") {
      videos[entry.path().stem().string()] = entry.path();
    }
  }
  return videos;
}

EmbeddingSet pooled_embeddings(const std::vector<std::string> &files) {
  std::vector<EmbeddingSet> sets;
  for (const auto &f : files) {
    require_exists(f, "embedding file");
    sets.push_back(read_embeddings(f));
  }
  EmbeddingSet pooled;
  pooled.model_id = sets.front().model_id;
  pooled.dimension = sets.front().dimension;
  for (auto &s : sets) {
    if (s.dimension != pooled.dimension) throw UsageError("embedding files have different dimensions");
    for (auto &v : s.vectors) pooled.vectors.push_back(std::move(v));
  }
  return pooled;
}

int cmd_eval(const Options &o, std::ostream &out) {
  const auto &e = o.eval;
  require(e.gen_root, "--gen-root");
  require(e.gt_root, "--gt-root");
  AlignMode mode;
  std::unique_ptr<DistanceBackend> backend;
  try {
    mode = parse_align_mode(e.mode);
    backend = make_backend(e.backend);
  } catch (const Error &err) {
    throw UsageError(err.what());
  }
  if (e.fid_gen.empty() != e.fid_gt.empty()) {
    throw UsageError("--fid-gen and --fid-gt must be given together");
  }
  const auto gen_videos = list_videos(e.gen_root);
  const auto gt_videos = list_videos(e.gt_root);
  std::vector<std::string> orphans, ids;
  for (const auto &[id, path] : gen_videos) {
    if (gt_videos.count(id)) ids.push_back(id);
    else orphans.push_back("gen/" + id);
  }
  for (const auto &[id, path] : gt_videos) {
    if (!gen_videos.count(id)) orphans.push_back("gt/" + id);
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto &x : orphans) list += " " + x;
    throw UsageError("unpaired videos:" + list);
  }
  if (ids.empty()) throw UsageError("no videos to evaluate");

  struct VideoResult {
    VideoScore aligned;
    PdpResult pdp;
    AlignmentResult alignment;
  };
  std::vector<std::optional<VideoResult>> results(ids.size());
  PdpConfig pdp_cfg;
  pdp_cfg.n_points = e.n_points;
  pdp_cfg.distance_fn = e.backend;
  parallel_for(ids.size(), o.jobs, [&](std::size_t i) {
    const auto gen = load_sequence(gen_videos.at(ids[i]));
    const auto gt = load_sequence(gt_videos.at(ids[i]));
    VideoResult r;
    r.alignment = align_frames(gen, gt, *backend, mode);
    r.aligned = VideoScore{backend->id(), r.alignment.mean(), gen.size()};
    r.pdp = pdp_score(gt, gen, pdp_cfg, *backend);
    results[i] = std::move(r);
  });

  json videos = json::array();
  std::vector<VideoScore> aligned, pdp, pdp_norm, final_distance;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto &r = *results[i];
    json matches = json::array();
    for (const auto &[g, t] : r.alignment.matches) matches.push_back({g, t});
    videos.push_back({{"id", ids[i]},
                      {"frames", r.aligned.frame_count},
                      {"metrics",
                       {{backend->id(), r.aligned.value},
                        {"pdp", r.pdp.pdp},
                        {"pdp_norm", r.pdp.pdp_norm},
                        {"final_distance", r.pdp.final_distance}}},
                      {"matches", std::move(matches)}});
    aligned.push_back(r.aligned);
    pdp.push_back({"pdp", r.pdp.pdp, r.aligned.frame_count});
    pdp_norm.push_back({"pdp_norm", r.pdp.pdp_norm, r.aligned.frame_count});
    final_distance.push_back({"final_distance", r.pdp.final_distance, r.aligned.frame_count});
  }
  json report;
  report["videos"] = std::move(videos);
  report["aggregate"] = {{backend->id(), aggregate(aligned)},
                         {"pdp", aggregate(pdp)},
                         {"pdp_norm", aggregate(pdp_norm)},
                         {"final_distance", aggregate(final_distance)}};
  report["fid"] = nullptr;
  if (!e.fid_gen.empty()) {
    report["fid"] = frechet_distance(gaussian_stats(pooled_embeddings(e.fid_gen)),
                                     gaussian_stats(pooled_embeddings(e.fid_gt)));
  }
  report["config"] = {{"backend", backend->id()}, {"mode", to_string(mode)}, {"n_points", e.n_points}};
  const std::string text = report.dump(2) + "\n";
  if (!e.report.empty()) write_file_atomic(e.report, text);
  out << text;
  return 0;
}

// ---- synth -----------------------------------------------------------------

void reject_unknown(const json &obj, std::initializer_list<const char *> known, const std::string &where) {
  for (const auto &[key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char *k) { return key == k; })) {
      throw UsageError("script: unknown field '" + where + key + "'");
    }
  }
}

template <typename T> T field(const json &obj, const char *key, const std::string &where) {
  if (!obj.contains(key)) throw UsageError("script: missing field '" + where + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception &) {
    throw UsageError("script: field '" + where + key + "' has the wrong type");
  }
}

RevealScript parse_script(const json &j, const fs::path &base) {
  if (!j.is_object()) throw UsageError("script: top level must be an object");
  reject_unknown(j, {"target", "order", "steps", "seed", "fps", "occluder"}, "");
  RevealScript s;
  const auto target = field<json>(j, "target", "");
  if (!target.is_object()) throw UsageError("script: field 'target' must be an object");
  if (target.contains("path")) {
    reject_unknown(target, {"path"}, "target.");
    fs::path p = field<std::string>(target, "path", "target.");
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw UsageError("script: field 'target.path' names a missing file");
    s.target = read_image(p);
  } else {
    reject_unknown(target, {"width", "height", "channels", "seed"}, "target.");
    const int w = field<int>(target, "width", "target."), h = field<int>(target, "height", "target.");
    const int c = target.contains("channels") ? field<int>(target, "channels", "target.") : 3;
    if (w < 1 || h < 1) throw UsageError("script: field 'target.width' and 'target.height' must be positive");
    if (c != 1 && c != 3) throw UsageError("script: field 'target.channels' must be 1 or 3");
    const auto seed = target.contains("seed") ? field<std::uint64_t>(target, "seed", "target.") : 0;
    s.target = procedural_target(w, h, c, seed);
  }
  try {
    s.order = parse_reveal_order(j.contains("order") ? field<std::string>(j, "order", "") : "raster");
  } catch (const Error &) {
    throw UsageError("script: field 'order' must be raster, random-patch or coarse-to-fine");
  }
  const auto steps = field<long long>(j, "steps", "");
  if (steps < 1) throw UsageError("script: field 'steps' must be at least 1");
  s.steps = static_cast<std::size_t>(steps);
  if (j.contains("seed")) s.seed = field<std::uint64_t>(j, "seed", "");
  if (j.contains("fps")) {
    const auto &f = j.at("fps");
    try {
      s.fps = f.is_string() ? Rational::parse(f.get<std::string>()) : Rational::parse(f.dump());
    } catch (const Error &) {
      throw UsageError("script: field 'fps' is not a number");
    }
    if (s.fps <= Rational(0)) throw UsageError("script: field 'fps' must be positive");
  }
  if (j.contains("occluder")) {
    const auto &oj = j.at("occluder");
    if (!oj.is_object()) throw UsageError("script: field 'occluder' must be an object");
    reject_unknown(oj, {"size", "color", "label", "trajectory", "sweep"}, "occluder.");
    Occluder occ;
    occ.size = field<int>(oj, "size", "occluder.");
    if (occ.size < 1) throw UsageError("script: field 'occluder.size' must be positive");
    if (oj.contains("color")) {
      const auto color = field<std::vector<int>>(oj, "color", "occluder.");
      if (color.size() != 3 || std::any_of(color.begin(), color.end(), [](int v) { return v < 0 || v > 255; })) {
        throw UsageError("script: field 'occluder.color' must be three values in [0,255]");
      }
      for (int k = 0; k < 3; ++k) occ.color[k] = static_cast<std::uint8_t>(color[k]);
    }
    if (oj.contains("label")) occ.label = field<std::string>(oj, "label", "occluder.");
    if (oj.contains("trajectory") == oj.contains("sweep")) {
      throw UsageError("script: field 'occluder' needs exactly one of 'trajectory' or 'sweep'");
    }
    if (oj.contains("trajectory")) {
      for (const auto &pos : field<std::vector<std::vector<int>>>(oj, "trajectory", "occluder.")) {
        if (pos.size() != 2) throw UsageError("script: field 'occluder.trajectory' entries must be [x,y]");
        occ.trajectory.emplace_back(pos[0], pos[1]);
      }
      if (occ.trajectory.size() != s.steps) {
        throw UsageError("script: field 'occluder.trajectory' must have one position per step");
      }
    } else {
      const auto sweep = field<json>(oj, "sweep", "occluder.");
      reject_unknown(sweep, {"from", "to"}, "occluder.sweep.");
      const auto from = field<std::vector<int>>(sweep, "from", "occluder.sweep.");
      const auto to = field<std::vector<int>>(sweep, "to", "occluder.sweep.");
      if (from.size() != 2 || to.size() != 2) throw UsageError("script: field 'occluder.sweep' needs [x,y] ends");
      occ.trajectory = sweep_trajectory({from[0], from[1]}, {to[0], to[1]}, s.steps);
    }
    s.occluder = std::move(occ);
  }
  return s;
}

int cmd_synth(const Options &o, std::ostream &out) {
  const auto &sy = o.synth;
  require(sy.script, "--script");
  require(sy.out, "--out");
  require_exists(sy.script, "script");
  if (sy.format != "dir" && sy.format != "raw") throw UsageError("--format must be dir or raw");
  json j;
  try {
    j = json::parse(read_file_text(sy.script));
  } catch (const json::exception &e) {
    throw UsageError(std::string("script: ") + e.what());
  }
  const auto script = parse_script(j, fs::path(sy.script).parent_path());
  const auto clean = generate_process(script);
  const fs::path root = sy.out;
  const auto format = sy.format == "raw" ? SequenceFormat::Raw : SequenceFormat::Directory;
  const auto seq_path = [&](const std::string &name) {
    return format == SequenceFormat::Raw ? root / (name + ".pbseq") : root / name;
  };
  write_image(script.target, root / "target.png");
  if (script.occluder) {
    const auto occluded = overlay_occluder(clean, script);
    save_sequence(occluded.frames, seq_path("frames"), format);
    save_sequence(clean, seq_path("clean"), format);
    save_masks(occluded.masks, root / "masks");
    write_detections(occluded.detections, root / "detections.json");
  } else {
    save_sequence(clean, seq_path("frames"), format);
  }
  out << "frames " << clean.size() << "\n";
  return 0;
}

// ---- plot ------------------------------------------------------------------

int cmd_plot(const Options &o, std::ostream &out) {
  const auto &p = o.plot;
  if (p.inputs.empty()) throw UsageError("plot needs at least one profile CSV");
  require(p.out, "--out");
  if (!p.labels.empty() && p.labels.size() != p.inputs.size()) {
    throw UsageError("--labels needs one label per input");
  }
  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    require_exists(p.inputs[i], "profile");
    try {
      series.push_back({p.labels.empty() ? fs::path(p.inputs[i]).stem().string() : p.labels[i],
                        parse_profile_csv(read_file_text(p.inputs[i]))});
    } catch (const LoadError &e) {
      throw UsageError(p.inputs[i] + ": " + e.what());
    }
  }
  if (p.mean) {
    std::vector<DistanceProfile> profiles;
    for (const auto &s : series) profiles.push_back(p.normalize ? normalize_profile(s.profile) : s.profile);
    series.push_back({"mean", mean_profile(profiles, p.n_points)});
  }
  PlotOptions opts;
  opts.width = p.width;
  opts.height = p.height;
  opts.x_label = p.x_label;
  opts.y_label = p.y_label;
  opts.title = p.title;
  opts.normalize = p.normalize;
  try {
    write_file_atomic(p.out, render_svg(series, opts));
  } catch (const RangeError &e) {
    throw UsageError(e.what());
  }
  out << "polylines " << series.size() << "\n";
  return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  std::string command;
  try {
    Options first;
    CLI::App probe("pbtool: painting-process curation and evaluation");
    build_app(probe, first);
    try {
      parse(probe, args);
    } catch (const CLI::ParseError &e) {
      return probe.exit(e, out, err) == 0 ? 0 : 2;
    }
    CLI::App *sub = probe.get_subcommands().front();
    command = sub->get_name();
    std::vector<std::string> merged = args;
    if (!first.config.empty()) {
      const auto extra = config_tokens(*sub, first.config);
      merged.insert(merged.end(), extra.begin(), extra.end());
    }
    Options o;
    CLI::App app("pbtool: painting-process curation and evaluation");
    build_app(app, o);
    try {
      parse(app, merged);
    } catch (const CLI::ParseError &e) {
      return app.exit(e, out, err) == 0 ? 0 : 2;
    }
    if (command == "curate") return cmd_curate(o, out);
    if (command == "pdp") return cmd_pdp(o, out);
    if (command == "eval") return cmd_eval(o, out);
    if (command == "synth") return cmd_synth(o, out);
    if (command == "plot") return cmd_plot(o, out);
    err << "unknown command '" << command << "'\n";
    return 2;
  } catch (const UsageError &e) {
    err << command << ": " << e.what() << "\n";
    return 2;
  } catch (const LoadError &e) {
    err << command << ": " << e.what() << "\n";
    return 2;
  } catch (const StageError &e) {
    err << command << ": stage " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << command << ": " << e.what() << "\n";
    return 1;
  }
}

} // namespace pb
