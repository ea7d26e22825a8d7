#pragma once

// ZSEB embedding exchange files.
//
// Binary layout, all integers and floats little-endian:
//
//   offset  size  field
//   0       4     magic "ZSEB"
//   4       2     version (u16, currently 1)
//   6       4     dim (u32)
//   10      8     count (u64)
//   18      1     flags (bit 0: rows pre-normalized; other bits zero)
//   19      4*count*dim  payload, f32 row-major
//
// Each file has a JSON sidecar at "<path>.json" describing the rows and
// carrying the SHA-256 of the payload bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zeroleaf/vecspace.hpp"

namespace zeroleaf {

inline constexpr char kZsebMagic[4] = {'Z', 'S', 'E', 'B'};
inline constexpr std::uint16_t kZsebVersion = 1;
inline constexpr std::size_t kZsebHeaderSize = 19;
inline constexpr std::uint8_t kZsebFlagNormalized = 0x01;

enum class RowKind { text, image };

/// Row of a text-embedding file: one class description.
struct TextRow {
  int class_id = 0;
  std::string class_name;
  std::size_t description_index = 0;
  std::string description_text;
  bool operator==(const TextRow&) const = default;
};

/// Row of an image-embedding file.
struct ImageRow {
  std::string item_id;
  std::string source;
  std::optional<int> true_label;
  bool operator==(const ImageRow&) const = default;
};

struct Sidecar {
  RowKind kind = RowKind::image;
  std::string provenance;
  std::string payload_sha256;  // filled in by write_embedding_file
  std::vector<TextRow> text_rows;
  std::vector<ImageRow> image_rows;

  std::size_t rows() const noexcept { return kind == RowKind::text ? text_rows.size() : image_rows.size(); }
};

struct ZsebHeader {
  std::uint16_t version = kZsebVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::uint8_t flags = 0;
};

struct EmbeddingFile {
  ZsebHeader header;
  EmbeddingMatrix matrix;
  Sidecar sidecar;
  /// Set when the header claimed normalized rows that failed re-verification.
  std::optional<std::string> normalization_note;
};

struct ReadOptions {
  /// Fail with NotNormalized instead of dropping an unverifiable normalized flag.
  bool strict = false;
};

std::filesystem::path sidecar_path(const std::filesystem::path& file);

/// Header + payload bytes exactly as written to disk.
std::string encode_zseb(const EmbeddingMatrix& matrix);
ZsebHeader decode_zseb_header(std::string_view bytes);

std::string sidecar_to_json(const Sidecar& sidecar, const ZsebHeader& header);
Sidecar sidecar_from_json(std::string_view text);

void write_embedding_file(const EmbeddingMatrix& matrix, Sidecar sidecar, const std::filesystem::path& path);
EmbeddingFile read_embedding_file(const std::filesystem::path& path, const ReadOptions& options = {});

/// Reads only the 19-byte header.
ZsebHeader read_zseb_header(const std::filesystem::path& path);

}  // namespace zeroleaf
