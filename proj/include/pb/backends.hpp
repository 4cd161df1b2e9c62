#pragma once

#include "pb/frame.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pb {

enum class BackendKind { PixelMse, Ssim, GramTexture, EmbeddingFile };
enum class EmbeddingMode { Cosine, L2 };

std::string_view to_string(BackendKind kind);

// Mean squared difference on the [0,1] scale. Frames of different size are
// compared after bilinearly resizing the larger one to the smaller one's size.
double mse_distance(const Frame &a, const Frame &b);

// 1 - SSIM over 8x8 windows at stride 8 on grayscale, clamped to [0,1].
double ssim_distance(const Frame &a, const Frame &b);

// Distance between 4x4 Gram matrices of oriented gradient responses on a
// 64x64 grayscale downsample, mapped to [0,1) via x / (1 + x).
double gram_texture_distance(const Frame &a, const Frame &b);

// Cosine: (1 - cos) / 2 in [0,1]. L2: Euclidean distance.
double embedding_distance(std::span<const double> a, std::span<const double> b,
                          EmbeddingMode mode = EmbeddingMode::Cosine);

std::span<const double> sequence_embedding_lookup(const EmbeddingSet &es, std::size_t index);

// Perceptual distance D(f, target). Implementations are stateless once
// constructed and may be called concurrently.
class DistanceBackend {
public:
  virtual ~DistanceBackend() = default;
  virtual std::string id() const = 0;
  virtual BackendKind kind() const = 0;
  virtual double distance(const Frame &a, const Frame &b) const = 0;
};

class MseBackend final : public DistanceBackend {
public:
  std::string id() const override { return "mse"; }
  BackendKind kind() const override { return BackendKind::PixelMse; }
  double distance(const Frame &a, const Frame &b) const override { return mse_distance(a, b); }
};

class SsimBackend final : public DistanceBackend {
public:
  std::string id() const override { return "ssim"; }
  BackendKind kind() const override { return BackendKind::Ssim; }
  double distance(const Frame &a, const Frame &b) const override { return ssim_distance(a, b); }
};

class GramTextureBackend final : public DistanceBackend {
public:
  std::string id() const override { return "gram"; }
  BackendKind kind() const override { return BackendKind::GramTexture; }
  double distance(const Frame &a, const Frame &b) const override { return gram_texture_distance(a, b); }
};

// Distances between precomputed embeddings. Frames are matched to their
// vectors by pixel content: bind() registers each frame of a sequence with
// the corresponding row of an EmbeddingSet.
class EmbeddingBackend final : public DistanceBackend {
public:
  explicit EmbeddingBackend(std::string model_id = "embedding", EmbeddingMode mode = EmbeddingMode::Cosine);

  std::string id() const override { return model_id_; }
  BackendKind kind() const override { return BackendKind::EmbeddingFile; }
  double distance(const Frame &a, const Frame &b) const override;

  // Throws StructureError when counts or dimensions disagree, or when
  // pixel-identical frames were given different vectors.
  void bind(const FrameSequence &seq, const EmbeddingSet &es);
  void bind(const Frame &f, std::span<const double> vec);
  std::span<const double> lookup(const Frame &f) const;
  std::size_t dimension() const { return dimension_; }

private:
  std::string model_id_;
  EmbeddingMode mode_;
  std::size_t dimension_ = 0;
  // Content hash -> candidate (frame, vector) pairs; collisions resolved by
  // full pixel comparison.
  std::unordered_map<std::uint64_t, std::vector<std::pair<Frame, std::vector<double>>>> table_;
};

// "mse", "ssim" or "gram". Embedding backends are built explicitly.
std::unique_ptr<DistanceBackend> make_backend(std::string_view id);

std::uint64_t frame_fingerprint(const Frame &f);

} // namespace pb
