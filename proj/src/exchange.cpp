#include "zeroleaf/exchange.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "fileio.hpp"

namespace zeroleaf {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out += static_cast<char>((value >> (8 * i)) & 0xff);
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<std::uint8_t>(bytes[offset + i])) << (8 * i);
  return value;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string payload_digest(std::string_view file_bytes) {
  return io::to_hex(io::sha256(as_bytes(file_bytes.substr(kZsebHeaderSize))));
}

std::uint64_t payload_size(const ZsebHeader& h) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 4;
  if (h.dim != 0 && h.count > limit / h.dim) throw Error(Errc::TruncatedPayload, "count*dim overflows");
  return 4 * h.count * h.dim;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& file) {
  auto p = file;
  p += ".json";
  return p;
}

std::string encode_zseb(const EmbeddingMatrix& matrix) {
  const auto& data = matrix.data();
  if (!detail::all_finite(data)) throw Error(Errc::NonFiniteValue, "matrix contains NaN/Inf");
  std::string out;
  out.reserve(kZsebHeaderSize + 4 * static_cast<std::size_t>(data.size()));
  out.append(kZsebMagic, 4);
  put_le<std::uint16_t>(out, kZsebVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.rows()));
  out += static_cast<char>(matrix.normalized() ? kZsebFlagNormalized : 0);
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(data(i, j)));
  return out;
}

ZsebHeader decode_zseb_header(std::string_view bytes) {
  if (bytes.size() < kZsebHeaderSize)
    throw Error(Errc::TruncatedPayload, "header needs " + std::to_string(kZsebHeaderSize) + " bytes, have " +
                                            std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kZsebMagic, 4) != 0) throw Error(Errc::BadMagic, std::string(bytes.substr(0, 4)));
  ZsebHeader h;
  h.version = get_le<std::uint16_t>(bytes, 4);
  if (h.version != kZsebVersion) throw Error(Errc::UnsupportedVersion, std::to_string(h.version));
  h.dim = get_le<std::uint32_t>(bytes, 6);
  h.count = get_le<std::uint64_t>(bytes, 10);
  h.flags = static_cast<std::uint8_t>(bytes[18]);
  if (h.dim == 0) throw Error(Errc::ParseError, "dim must be >= 1");
  return h;
}

std::string sidecar_to_json(const Sidecar& sidecar, const ZsebHeader& header) {
  ordered_json j;
  j["format"] = "zseb-sidecar";
  j["version"] = kZsebVersion;
  j["kind"] = sidecar.kind == RowKind::text ? "text" : "image";
  j["provenance"] = sidecar.provenance;
  j["dim"] = header.dim;
  j["count"] = header.count;
  j["payload_sha256"] = sidecar.payload_sha256;
  auto rows = ordered_json::array();
  if (sidecar.kind == RowKind::text) {
    for (const auto& r : sidecar.text_rows)
      rows.push_back({{"class_id", r.class_id},
                      {"class_name", r.class_name},
                      {"description_index", r.description_index},
                      {"description_text", r.description_text}});
  } else {
    for (const auto& r : sidecar.image_rows) {
      ordered_json row;
      row["item_id"] = r.item_id;
      row["source"] = r.source;
      row["true_label"] = r.true_label ? ordered_json(*r.true_label) : ordered_json(nullptr);
      rows.push_back(std::move(row));
    }
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

Sidecar sidecar_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != "zseb-sidecar") throw Error(Errc::ParseError, "not a zseb sidecar");
    if (j.at("version").get<int>() != kZsebVersion)
      throw Error(Errc::UnsupportedVersion, "sidecar version " + j.at("version").dump());
    Sidecar s;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "text") {
      s.kind = RowKind::text;
    } else if (kind == "image") {
      s.kind = RowKind::image;
    } else {
      throw Error(Errc::ParseError, "sidecar kind '" + kind + "'");
    }
    s.provenance = j.at("provenance").get<std::string>();
    s.payload_sha256 = j.at("payload_sha256").get<std::string>();
    for (const auto& r : j.at("rows")) {
      if (s.kind == RowKind::text) {
        s.text_rows.push_back({r.at("class_id").get<int>(), r.at("class_name").get<std::string>(),
                               r.at("description_index").get<std::size_t>(),
                               r.at("description_text").get<std::string>()});
      } else {
        ImageRow row{r.at("item_id").get<std::string>(), r.value("source", std::string()), std::nullopt};
        if (r.contains("true_label") && !r.at("true_label").is_null()) row.true_label = r.at("true_label").get<int>();
        s.image_rows.push_back(std::move(row));
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("sidecar: ") + e.what());
  }
}

void write_embedding_file(const EmbeddingMatrix& matrix, Sidecar sidecar, const std::filesystem::path& path) {
  if (sidecar.rows() != static_cast<std::size_t>(matrix.rows()))
    throw Error(Errc::RowCountMismatch, "sidecar rows " + std::to_string(sidecar.rows()) + ", matrix rows " +
                                            std::to_string(matrix.rows()));
  const auto bytes = encode_zseb(matrix);
  sidecar.payload_sha256 = payload_digest(bytes);
  const auto header = decode_zseb_header(bytes);
  io::write_atomic(path, bytes);
  io::write_atomic(sidecar_path(path), sidecar_to_json(sidecar, header));
}

ZsebHeader read_zseb_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::string buf(kZsebHeaderSize, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return decode_zseb_header(buf);
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path, const ReadOptions& options) {
  const auto bytes = io::read_text(path);
  const auto header = decode_zseb_header(bytes);
  const auto expected = kZsebHeaderSize + payload_size(header);
  if (bytes.size() < expected)
    throw Error(Errc::TruncatedPayload, path.string() + ": expected " + std::to_string(expected) + " bytes, have " +
                                            std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw Error(Errc::ParseError, path.string() + ": " + std::to_string(bytes.size() - expected) + " trailing bytes");

  auto sidecar = sidecar_from_json(io::read_text(sidecar_path(path)));
  if (sidecar.rows() != header.count)
    throw Error(Errc::RowCountMismatch, "sidecar rows " + std::to_string(sidecar.rows()) + ", header count " +
                                            std::to_string(header.count));
  if (payload_digest(bytes) != sidecar.payload_sha256) throw Error(Errc::DigestMismatch, path.string());

  EmbeddingMatrix::Storage data(static_cast<Eigen::Index>(header.count), static_cast<Eigen::Index>(header.dim));
  std::size_t offset = kZsebHeaderSize;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j, offset += 4)
      data(i, j) = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));

  EmbeddingFile file{header, EmbeddingMatrix(), std::move(sidecar), std::nullopt};
  if (header.flags & kZsebFlagNormalized) {
    try {
      file.matrix = EmbeddingMatrix(data, true);
      return file;
    } catch (const Error& e) {
      if (e.code() != Errc::NotNormalized || options.strict) throw;
      file.normalization_note = e.what();
    }
  }
  file.matrix = EmbeddingMatrix(std::move(data), false);
  return file;
}

}  // namespace zeroleaf
