#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fileio.hpp"
#include "textutil.hpp"
#include "zeroleaf/exchange.hpp"
#include "zeroleaf/harness.hpp"

namespace zeroleaf {

namespace {

constexpr std::string_view kManifestHeader = "zeroleaf-manifest v1";

EmbeddingRef parse_ref(std::string_view text, std::size_t line_no) {
  const auto hash = text.rfind('#');
  if (hash == std::string_view::npos || hash == 0 || hash + 1 == text.size())
    throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": embedding locator must be path#row");
  const auto row = text::parse_u64(text.substr(hash + 1));
  if (!row) throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": bad row in locator");
  return {std::filesystem::path(std::string(text.substr(0, hash))), *row};
}

std::filesystem::path resolve(const DatasetManifest& m, const std::filesystem::path& file) {
  return file.is_absolute() ? file : m.base_dir / file;
}

}  // namespace

std::vector<int> DatasetManifest::labels() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.true_label);
  return out;
}

std::vector<std::string> DatasetManifest::sources() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries)
    if (seen.insert(e.source).second) out.push_back(e.source);
  return out;
}

std::int64_t ManifestTally::source_total(std::size_t s) const {
  std::int64_t n = 0;
  for (auto v : per_source.at(s)) n += v;
  return n;
}

DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::unordered_map<std::string, int> class_index;
  std::unordered_set<std::string> ids;
  bool seen_header = false, seen_classes = false;
  std::size_t line_no = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (text::trim(raw).empty() || raw.front() == '#') continue;
    const auto where = "line " + std::to_string(line_no);
    if (!seen_header) {
      if (text::trim(raw) != kManifestHeader) throw Error(Errc::ParseError, where + ": expected manifest header");
      seen_header = true;
      continue;
    }
    const auto fields = text::split_tabs(raw);
    if (!seen_classes) {
      if (fields.size() < 2 || fields[0] != "classes")
        throw Error(Errc::ParseError, where + ": expected 'classes' line");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].empty()) throw Error(Errc::ParseError, where + ": empty class name");
        if (!class_index.emplace(fields[i], static_cast<int>(i - 1)).second)
          throw Error(Errc::DuplicateClassName, fields[i]);
        m.class_names.push_back(fields[i]);
      }
      seen_classes = true;
      continue;
    }
    if (fields.size() != 4) throw Error(Errc::ParseError, where + ": expected 4 tab-separated fields");
    if (fields[0].empty()) throw Error(Errc::ParseError, where + ": empty item id");
    if (!ids.insert(fields[0]).second) throw Error(Errc::DuplicateItemId, fields[0]);
    const auto label = class_index.find(fields[2]);
    if (label == class_index.end()) throw Error(Errc::LabelOutOfRange, where + ": unknown class '" + fields[2] + "'");
    ManifestEntry e{fields[0], fields[1], label->second, std::nullopt};
    if (fields[3] != "-") e.embedding = parse_ref(fields[3], line_no);
    m.entries.push_back(std::move(e));
  }
  if (!seen_header || !seen_classes) throw Error(Errc::ParseError, "manifest header or classes line missing");
  return m;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out(kManifestHeader);
  out += "\nclasses";
  for (const auto& c : manifest.class_names) out += "\t" + c;
  out += "\n";
  for (const auto& e : manifest.entries) {
    out += e.item_id + "\t" + e.source + "\t" + manifest.class_names.at(static_cast<std::size_t>(e.true_label)) + "\t";
    out += e.embedding ? e.embedding->file.generic_string() + "#" + std::to_string(e.embedding->row) : "-";
    out += "\n";
  }
  return out;
}

void check_embedding_refs(const DatasetManifest& manifest) {
  std::map<std::filesystem::path, std::optional<std::uint64_t>> counts;
  std::vector<std::string> bad;
  for (const auto& e : manifest.entries) {
    if (!e.embedding) continue;
    const auto file = resolve(manifest, e.embedding->file);
    auto it = counts.find(file);
    if (it == counts.end()) {
      std::optional<std::uint64_t> count;
      try {
        count = read_zseb_header(file).count;
      } catch (const Error&) {
      }
      it = counts.emplace(file, count).first;
    }
    if (!it->second || e.embedding->row >= *it->second) bad.push_back(e.item_id);
  }
  if (!bad.empty()) {
    std::string ids;
    for (const auto& id : bad) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(Errc::UnresolvableEmbeddingRef, ids);
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  auto m = parse_manifest(io::read_text(path), path.parent_path());
  check_embedding_refs(m);
  return m;
}

ManifestTally tally(const DatasetManifest& manifest) {
  ManifestTally t;
  t.sources = manifest.sources();
  const auto C = static_cast<std::size_t>(manifest.num_classes());
  t.per_source.assign(t.sources.size(), std::vector<std::int64_t>(C, 0));
  t.overall.assign(C, 0);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < t.sources.size(); ++s) index[t.sources[s]] = s;
  for (const auto& e : manifest.entries) {
    ++t.per_source[index[e.source]][static_cast<std::size_t>(e.true_label)];
    ++t.overall[static_cast<std::size_t>(e.true_label)];
    ++t.total;
  }
  return t;
}

EmbeddingMatrix load_manifest_embeddings(const DatasetManifest& manifest) {
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries)
    if (!e.embedding) missing.push_back(e.item_id);
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(Errc::UnresolvableEmbeddingRef, "no embedding locator: " + ids);
  }
  check_embedding_refs(manifest);

  std::map<std::filesystem::path, EmbeddingFile> files;
  EmbeddingMatrix::Storage out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& ref = *manifest.entries[i].embedding;
    const auto path = resolve(manifest, ref.file);
    auto it = files.find(path);
    if (it == files.end()) it = files.emplace(path, read_embedding_file(path)).first;
    const auto& data = it->second.matrix.data();
    if (i == 0) out.resize(static_cast<Eigen::Index>(manifest.entries.size()), data.cols());
    if (data.cols() != out.cols())
      throw Error(Errc::DimensionMismatch, "embedding files disagree on dim at " + manifest.entries[i].item_id);
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(ref.row));
  }
  if (manifest.entries.empty()) throw Error(Errc::LengthMismatch, "manifest has no entries");
  return EmbeddingMatrix(std::move(out), false);
}

}  // namespace zeroleaf
