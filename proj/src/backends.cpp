#include "pb/backends.hpp"

#include "pb/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace pb {

namespace {

// Brings two frames to a common size (the smaller-area frame's size).
std::pair<Frame, Frame> common_size(const Frame &a, const Frame &b) {
  if (a.width() == b.width() && a.height() == b.height()) {
    return {a, b};
  }
  if (a.pixel_count() <= b.pixel_count()) {
    return {a, resize_bilinear(b, a.width(), a.height())};
  }
  return {resize_bilinear(a, b.width(), b.height()), b};
}

struct WindowStats {
  double mean_a = 0, mean_b = 0, var_a = 0, var_b = 0, cov = 0;
};

WindowStats window_stats(const Frame &a, const Frame &b, int x0, int y0, int w, int h) {
  WindowStats s;
  const double n = static_cast<double>(w) * h;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      s.mean_a += a.at(x, y);
      s.mean_b += b.at(x, y);
    }
  }
  s.mean_a /= n;
  s.mean_b /= n;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      const double da = a.at(x, y) - s.mean_a;
      const double db = b.at(x, y) - s.mean_b;
      s.var_a += da * da;
      s.var_b += db * db;
      s.cov += da * db;
    }
  }
  s.var_a /= n;
  s.var_b /= n;
  s.cov /= n;
  return s;
}

double ssim_from_stats(const WindowStats &s) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  return ((2 * s.mean_a * s.mean_b + c1) * (2 * s.cov + c2)) /
         ((s.mean_a * s.mean_a + s.mean_b * s.mean_b + c1) * (s.var_a + s.var_b + c2));
}

using Gram = std::array<double, 16>;

// Second-moment matrix of [horizontal, vertical, diagonal, anti-diagonal]
// 3x3 gradient responses over interior pixels.
Gram gradient_gram(const Frame &gray) {
  const int w = gray.width(), h = gray.height();
  Gram g{};
  if (w < 3 || h < 3) {
    return g;
  }
  auto px = [&](int x, int y) { return gray.at(x, y) / 255.0; };
  std::size_t n = 0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double tl = px(x - 1, y - 1), tc = px(x, y - 1), tr = px(x + 1, y - 1);
      const double ml = px(x - 1, y), mr = px(x + 1, y);
      const double bl = px(x - 1, y + 1), bc = px(x, y + 1), br = px(x + 1, y + 1);
      const std::array<double, 4> r = {
          (tr + 2 * mr + br) - (tl + 2 * ml + bl),
          (bl + 2 * bc + br) - (tl + 2 * tc + tr),
          (tc + 2 * tr + mr) - (ml + 2 * bl + bc),
          (tc + 2 * tl + ml) - (mr + 2 * br + bc),
      };
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) g[i * 4 + j] += r[i] * r[j];
      }
      ++n;
    }
  }
  for (auto &v : g) v /= static_cast<double>(n);
  return g;
}

double frobenius(const Gram &g) {
  return std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
}

} // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
  case BackendKind::PixelMse: return "pixel-mse";
  case BackendKind::Ssim: return "ssim";
  case BackendKind::GramTexture: return "gram-texture";
  case BackendKind::EmbeddingFile: return "embedding-file";
  }
  return "unknown";
}

double mse_distance(const Frame &a, const Frame &b) {
  if (a.channels() != b.channels()) {
    throw StructureError("mse: channel mismatch (" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.channels()) + ")");
  }
  const auto [x, y] = common_size(a, b);
  const auto da = x.data(), db = y.data();
  // Integer accumulation keeps the result independent of summation order.
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const int d = static_cast<int>(da[i]) - static_cast<int>(db[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(sum) / (255.0 * 255.0) / static_cast<double>(da.size());
}

double ssim_distance(const Frame &a, const Frame &b) {
  const auto [x, y] = common_size(to_grayscale(a), to_grayscale(b));
  constexpr int kWindow = 8;
  const int nx = x.width() / kWindow, ny = x.height() / kWindow;
  double ssim = 0;
  if (nx == 0 || ny == 0) {
    ssim = ssim_from_stats(window_stats(x, y, 0, 0, x.width(), x.height()));
  } else {
    for (int wy = 0; wy < ny; ++wy) {
      for (int wx = 0; wx < nx; ++wx) {
        ssim += ssim_from_stats(window_stats(x, y, wx * kWindow, wy * kWindow, kWindow, kWindow));
      }
    }
    ssim /= static_cast<double>(nx) * ny;
  }
  return std::clamp(1.0 - ssim, 0.0, 1.0);
}

double gram_texture_distance(const Frame &a, const Frame &b) {
  constexpr int kSide = 64;
  const Gram ga = gradient_gram(resize_bilinear(to_grayscale(a), kSide, kSide));
  const Gram gb = gradient_gram(resize_bilinear(to_grayscale(b), kSide, kSide));
  Gram diff;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ga[i] - gb[i];
  const double scale = frobenius(ga) + frobenius(gb);
  if (scale < 1e-12) {
    return 0.0;
  }
  const double x = 2.0 * frobenius(diff) / scale;
  return x / (1.0 + x);
}

double embedding_distance(std::span<const double> a, std::span<const double> b, EmbeddingMode mode) {
  if (a.size() != b.size()) {
    throw StructureError("embedding dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  if (mode == EmbeddingMode::L2) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
  const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  if (na == 0.0 || nb == 0.0) {
    throw RangeError("cosine distance of a zero vector");
  }
  // (1 - cos) / 2 written as |a/|a| - b/|b||^2 / 4, which is exactly zero for
  // identical vectors.
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] / na - b[i] / nb;
    s += d * d;
  }
  return std::clamp(s / 4.0, 0.0, 1.0);
}

std::span<const double> sequence_embedding_lookup(const EmbeddingSet &es, std::size_t index) {
  if (index >= es.count()) {
    throw RangeError("embedding index " + std::to_string(index) + " out of range (count " +
                     std::to_string(es.count()) + ")");
  }
  return es.vectors[index];
}

std::uint64_t frame_fingerprint(const Frame &f) {
  // FNV-1a over shape and samples.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(static_cast<std::uint64_t>(f.width()));
  mix(static_cast<std::uint64_t>(f.height()));
  mix(static_cast<std::uint64_t>(f.channels()));
  for (auto v : f.data()) mix(v);
  return h;
}

EmbeddingBackend::EmbeddingBackend(std::string model_id, EmbeddingMode mode)
    : model_id_(std::move(model_id)), mode_(mode) {}

void EmbeddingBackend::bind(const Frame &f, std::span<const double> vec) {
  if (dimension_ == 0) {
    dimension_ = vec.size();
  } else if (vec.size() != dimension_) {
    throw StructureError("embedding dimension mismatch while binding");
  }
  auto &bucket = table_[frame_fingerprint(f)];
  for (const auto &[frame, stored] : bucket) {
    if (frame.same_pixels(f)) {
      if (!std::equal(stored.begin(), stored.end(), vec.begin(), vec.end())) {
        throw StructureError("identical frames bound to different embeddings");
      }
      return;
    }
  }
  bucket.emplace_back(f.with_timestamp(Rational(0)), std::vector<double>(vec.begin(), vec.end()));
}

void EmbeddingBackend::bind(const FrameSequence &seq, const EmbeddingSet &es) {
  es.validate();
  if (es.count() != seq.size()) {
    throw StructureError("embedding count " + std::to_string(es.count()) +
                         " does not match frame count " + std::to_string(seq.size()));
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    bind(seq[i], sequence_embedding_lookup(es, i));
  }
}

std::span<const double> EmbeddingBackend::lookup(const Frame &f) const {
  if (auto it = table_.find(frame_fingerprint(f)); it != table_.end()) {
    for (const auto &[frame, vec] : it->second) {
      if (frame.same_pixels(f)) return vec;
    }
  }
  throw LoadError("no embedding bound for frame");
}

double EmbeddingBackend::distance(const Frame &a, const Frame &b) const {
  return embedding_distance(lookup(a), lookup(b), mode_);
}

std::unique_ptr<DistanceBackend> make_backend(std::string_view id) {
  if (id == "mse") return std::make_unique<MseBackend>();
  if (id == "ssim") return std::make_unique<SsimBackend>();
  if (id == "gram") return std::make_unique<GramTextureBackend>();
  throw Error("unknown distance backend '" + std::string(id) + "' (expected mse, ssim or gram)");
}

} // namespace pb
