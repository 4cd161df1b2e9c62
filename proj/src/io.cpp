#include "pb/io.hpp"

#include "pb/errors.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pb {

namespace {

constexpr char kContainerMagic[6] = {'P', 'B', 'S', 'E', 'Q', '1'};
constexpr std::size_t kContainerHeaderSize = 6 + 4 + 4 + 1 + 4 + 8 + 8;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T> void put_le(std::vector<std::uint8_t> &out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
}

template <typename T> T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

// Natural-order comparison: digit runs compare by numeric value.
bool natural_less(const std::string &a, const std::string &b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view da(a.data() + i, ie - i), db(b.data() + j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

// Netpbm reader for binary P5/P6 with maxval 255.
Frame decode_netpbm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") {
    throw LoadError("unsupported netpbm variant '" + magic + "'");
  }
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception &) {
    throw LoadError("malformed netpbm header");
  }
  if (maxval != 255 || w < 1 || h < 1) {
    throw LoadError("netpbm must be 8-bit with positive size");
  }
  ++pos; // single whitespace after maxval
  const int c = magic == "P6" ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h * c;
  if (pos + n > bytes.size()) {
    throw LoadError("truncated netpbm payload");
  }
  return Frame(w, h, c, std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + n));
}

std::vector<std::uint8_t> encode_netpbm(const Frame &f) {
  const std::string header = std::string(f.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), f.data().begin(), f.data().end());
  return out;
}

std::optional<Rational> read_sequence_meta(const fs::path &dir) {
  const auto meta = dir / "sequence.json";
  if (!fs::exists(meta)) {
    return std::nullopt;
  }
  try {
    const auto j = nlohmann::json::parse(read_file_text(meta));
    const auto &fps = j.at("fps");
    return fps.is_string() ? Rational::parse(fps.get<std::string>())
                           : Rational::parse(fps.dump());
  } catch (const nlohmann::json::exception &e) {
    throw LoadError("malformed sequence.json: " + std::string(e.what()));
  }
}

} // namespace

void write_file_atomic(const fs::path &path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open '" + tmp.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const fs::path &path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file_bytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot open '" + path.string() + "'");
  }
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_file_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> encode_png(const Frame &f) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(f.width());
  image.height = static_cast<png_uint_32>(f.height());
  image.format = f.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, f.data().data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, f.data().data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

Frame decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw LoadError(std::string("png decode failed: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int c = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  // Alpha (if any) is composited over white.
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&image, &white, data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw LoadError(std::string("png decode failed: ") + image.message);
  }
  return Frame(static_cast<int>(image.width), static_cast<int>(image.height), c, std::move(data));
}

bool is_image_file(const fs::path &path) {
  const auto ext = lower(path.extension().string());
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

Frame read_image(const fs::path &path) {
  const auto bytes = read_file_bytes(path);
  const auto ext = lower(path.extension().string());
  if (ext == ".png") {
    return decode_png(bytes);
  }
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    return decode_netpbm(bytes);
  }
  throw LoadError("unsupported image format '" + path.string() + "'");
}

void write_image(const Frame &f, const fs::path &path) {
  const auto ext = lower(path.extension().string());
  if (ext == ".png") {
    write_file_atomic(path, encode_png(f));
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    write_file_atomic(path, encode_netpbm(f));
  } else {
    throw Error("unsupported image format '" + path.string() + "'");
  }
}

std::vector<fs::path> list_image_files(const fs::path &dir) {
  if (!fs::is_directory(dir)) {
    throw LoadError("not a directory: '" + dir.string() + "'");
  }
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const fs::path &a, const fs::path &b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return files;
}

std::string frame_filename(std::string_view prefix, std::size_t index, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return std::string(prefix) + buf + std::string(ext);
}

FrameSequence load_sequence(const fs::path &path, std::optional<Rational> fps) {
  if (!fs::exists(path)) {
    throw LoadError("sequence not found: '" + path.string() + "'");
  }
  if (fs::is_regular_file(path)) {
    auto seq = decode_container(read_file_bytes(path));
    if (fps && *fps != seq.fps()) {
      return FrameSequence::from_frames(seq.frames(), *fps);
    }
    return seq;
  }
  const auto files = list_image_files(path);
  if (files.empty()) {
    throw LoadError("no frames in '" + path.string() + "'");
  }
  const Rational rate = fps ? *fps : read_sequence_meta(path).value_or(Rational(1));
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      frames.push_back(read_image(files[i]));
    } catch (const LoadError &e) {
      throw LoadError(files[i].filename().string() + ": " + e.what(), i);
    } catch (const StructureError &e) {
      throw LoadError(files[i].filename().string() + ": " + e.what(), i);
    }
  }
  return FrameSequence::from_frames(std::move(frames), rate);
}

void save_sequence(const FrameSequence &seq, const fs::path &path, SequenceFormat format) {
  if (format == SequenceFormat::Raw) {
    write_file_atomic(path, encode_container(seq));
    return;
  }
  fs::create_directories(path);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    write_image(seq[i], path / frame_filename("frame_", i));
  }
  nlohmann::json meta;
  meta["fps"] = seq.fps().str();
  meta["count"] = seq.size();
  write_file_atomic(path / "sequence.json", meta.dump(2) + "\n");
}

std::vector<std::uint8_t> encode_container(const FrameSequence &seq) {
  std::vector<std::uint8_t> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.width()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.height()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(seq.channels()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.size()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(seq.fps().num()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(seq.fps().den()));
  for (const auto &f : seq.frames()) {
    out.insert(out.end(), f.data().begin(), f.data().end());
  }
  return out;
}

FrameSequence decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kContainerHeaderSize ||
      !std::equal(std::begin(kContainerMagic), std::end(kContainerMagic), bytes.begin())) {
    throw LoadError("not a PBSEQ1 container");
  }
  const auto w = get_le<std::uint32_t>(bytes, 6);
  const auto h = get_le<std::uint32_t>(bytes, 10);
  const auto c = get_le<std::uint8_t>(bytes, 14);
  const auto n = get_le<std::uint32_t>(bytes, 15);
  const auto fps_num = get_le<std::uint64_t>(bytes, 19);
  const auto fps_den = get_le<std::uint64_t>(bytes, 27);
  if (n == 0) {
    throw LoadError("no frames in container");
  }
  if (w == 0 || h == 0 || (c != 1 && c != 3) || fps_num == 0 || fps_den == 0 ||
      fps_num > static_cast<std::uint64_t>(INT64_MAX) || fps_den > static_cast<std::uint64_t>(INT64_MAX)) {
    throw StructureError("invalid container header");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(w) * h * c;
  const Rational fps(static_cast<std::int64_t>(fps_num), static_cast<std::int64_t>(fps_den));
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t begin = kContainerHeaderSize + frame_bytes * i;
    if (begin + frame_bytes > bytes.size()) {
      throw LoadError("truncated container payload", i);
    }
    frames.emplace_back(static_cast<int>(w), static_cast<int>(h), c,
                        std::vector<std::uint8_t>(bytes.begin() + begin, bytes.begin() + begin + frame_bytes));
  }
  return FrameSequence::from_frames(std::move(frames), fps);
}

OcclusionMask read_mask(const fs::path &path) {
  const Frame img = to_grayscale(read_image(path));
  std::vector<std::uint8_t> bits(img.pixel_count());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = img.data()[i] >= 128 ? 1 : 0;
  return OcclusionMask(img.width(), img.height(), std::move(bits));
}

void write_mask(const OcclusionMask &m, const fs::path &path) {
  std::vector<std::uint8_t> px(m.bits().size());
  std::transform(m.bits().begin(), m.bits().end(), px.begin(),
                 [](std::uint8_t b) { return b ? std::uint8_t{255} : std::uint8_t{0}; });
  write_image(Frame(m.width(), m.height(), 1, std::move(px)), path);
}

std::vector<OcclusionMask> load_masks(const fs::path &dir) {
  const auto files = list_image_files(dir);
  std::vector<OcclusionMask> masks;
  masks.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      masks.push_back(read_mask(files[i]));
    } catch (const Error &e) {
      throw LoadError(std::string("mask: ") + e.what(), i);
    }
  }
  return masks;
}

void save_masks(std::span<const OcclusionMask> masks, const fs::path &dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    write_mask(masks[i], dir / frame_filename("mask_", i));
  }
}

DetectionSet parse_detections(std::string_view json_text) {
  DetectionSet out;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto &jf : j.at("frames")) {
      FrameDetections fd;
      fd.index = jf.at("index").get<std::size_t>();
      for (const auto &jd : jf.at("detections")) {
        Detection d;
        d.label = jd.at("label").get<std::string>();
        const auto &box = jd.at("box");
        if (!box.is_array() || box.size() != 4) {
          throw LoadError("detection box must have 4 entries (frame " + std::to_string(fd.index) + ")");
        }
        d.box = PixelRect{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()};
        d.score = jd.at("score").get<double>();
        if (!(d.score >= 0.0 && d.score <= 1.0)) {
          throw LoadError("detection score outside [0,1]", fd.index);
        }
        if (d.box.empty() || d.box.x0 < 0 || d.box.y0 < 0) {
          throw LoadError("degenerate detection box", fd.index);
        }
        fd.detections.push_back(std::move(d));
      }
      out.frames.push_back(std::move(fd));
    }
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(std::string("malformed detections: ") + e.what());
  }
  std::sort(out.frames.begin(), out.frames.end(),
            [](const FrameDetections &a, const FrameDetections &b) { return a.index < b.index; });
  return out;
}

std::string format_detections(const DetectionSet &det) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto &fd : det.frames) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto &d : fd.detections) {
      list.push_back({{"label", d.label},
                      {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}},
                      {"score", d.score}});
    }
    frames.push_back({{"index", fd.index}, {"detections", std::move(list)}});
  }
  return nlohmann::json{{"frames", std::move(frames)}}.dump() + "\n";
}

DetectionSet read_detections(const fs::path &path) { return parse_detections(read_file_text(path)); }

void write_detections(const DetectionSet &det, const fs::path &path) {
  write_file_atomic(path, format_detections(det));
}

EmbeddingSet parse_embeddings(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) {
    throw LoadError("empty embedding file");
  }
  EmbeddingSet es;
  std::size_t count = 0;
  bool have_dim = false, have_count = false, have_model = false;
  std::istringstream hs(header);
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw LoadError("malformed embedding header field '" + field + "'");
    }
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    try {
      if (key == "dim") {
        es.dimension = std::stoul(value);
        have_dim = true;
      } else if (key == "count") {
        count = std::stoul(value);
        have_count = true;
      } else if (key == "model") {
        es.model_id = value;
        have_model = true;
      } else {
        throw LoadError("unknown embedding header key '" + key + "'");
      }
    } catch (const std::logic_error &) {
      throw LoadError("malformed embedding header value '" + field + "'");
    }
  }
  if (!have_dim || !have_count || !have_model || es.dimension == 0) {
    throw LoadError("embedding header needs dim, count and model");
  }
  std::string line;
  es.vectors.reserve(count);
  for (std::size_t row = 0; row < count; ++row) {
    if (!std::getline(in, line)) {
      throw LoadError("embedding file ends after " + std::to_string(row) + " of " +
                      std::to_string(count) + " rows");
    }
    std::vector<double> v;
    v.reserve(es.dimension);
    const char *p = line.data();
    const char *end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      double x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc()) {
        throw LoadError("bad number in embedding row " + std::to_string(row), row);
      }
      v.push_back(x);
      p = next;
    }
    if (v.size() != es.dimension) {
      throw LoadError("embedding row " + std::to_string(row) + " has " + std::to_string(v.size()) +
                          " values, expected " + std::to_string(es.dimension),
                      row);
    }
    es.vectors.push_back(std::move(v));
  }
  return es;
}

std::string format_embeddings(const EmbeddingSet &es) {
  es.validate();
  if (es.model_id.empty() || es.model_id.find_first_of(" \t\n") != std::string::npos) {
    throw Error("embedding model id must be a non-empty token");
  }
  std::string out = "dim=" + std::to_string(es.dimension) + " count=" + std::to_string(es.count()) +
                    " model=" + es.model_id + "\n";
  char buf[40];
  for (const auto &v : es.vectors) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v[i]);
      if (i) out.push_back(' ');
      out.append(buf, p);
    }
    out.push_back('\n');
  }
  return out;
}

EmbeddingSet read_embeddings(const fs::path &path) { return parse_embeddings(read_file_text(path)); }

void write_embeddings(const EmbeddingSet &es, const fs::path &path) {
  write_file_atomic(path, format_embeddings(es));
}

} // namespace pb
