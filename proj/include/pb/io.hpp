#pragma once

#include "pb/frame.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pb {

namespace fs = std::filesystem;

enum class SequenceFormat { Directory, Raw };

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path &path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const fs::path &path, std::string_view text);
std::vector<std::uint8_t> read_file_bytes(const fs::path &path);
std::string read_file_text(const fs::path &path);

std::vector<std::uint8_t> encode_png(const Frame &f);
Frame decode_png(std::span<const std::uint8_t> bytes);

// PNG, binary PPM (P6) and binary PGM (P5), chosen by extension.
Frame read_image(const fs::path &path);
void write_image(const Frame &f, const fs::path &path);
bool is_image_file(const fs::path &path);

// Image files of a directory in natural order ("frame_2" before "frame_10").
std::vector<fs::path> list_image_files(const fs::path &dir);

// A directory of image files (optionally with a `sequence.json` carrying
// {"fps": "num/den"}) or a raw PBSEQ1 container file. An explicit fps wins over
// embedded metadata; a directory without either defaults to 1 fps.
FrameSequence load_sequence(const fs::path &path, std::optional<Rational> fps = std::nullopt);
void save_sequence(const FrameSequence &seq, const fs::path &path,
                   SequenceFormat format = SequenceFormat::Directory);

std::vector<std::uint8_t> encode_container(const FrameSequence &seq);
FrameSequence decode_container(std::span<const std::uint8_t> bytes);

// Masks are 1-channel images, 0 = keep, 255 = occluded; samples >= 128 count
// as occluded.
OcclusionMask read_mask(const fs::path &path);
void write_mask(const OcclusionMask &m, const fs::path &path);
std::vector<OcclusionMask> load_masks(const fs::path &dir);
void save_masks(std::span<const OcclusionMask> masks, const fs::path &dir);

DetectionSet parse_detections(std::string_view json_text);
std::string format_detections(const DetectionSet &det);
DetectionSet read_detections(const fs::path &path);
void write_detections(const DetectionSet &det, const fs::path &path);

// Header line `dim=<d> count=<n> model=<id>` followed by n rows of d floats.
EmbeddingSet parse_embeddings(std::string_view text);
std::string format_embeddings(const EmbeddingSet &es);
EmbeddingSet read_embeddings(const fs::path &path);
void write_embeddings(const EmbeddingSet &es, const fs::path &path);

std::string frame_filename(std::string_view prefix, std::size_t index, std::string_view ext = ".png");

} // namespace pb
