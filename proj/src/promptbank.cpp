#include "zeroleaf/promptbank.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fileio.hpp"

namespace zeroleaf {

namespace {

constexpr std::string_view kPromptHeader = "zeroleaf-prompts v1";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ClassPromptSet> parse_prompt_sets(std::string_view text) {
  std::vector<ClassPromptSet> sets;
  std::set<std::string> names;
  bool seen_header = false;
  std::size_t line_no = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != kPromptHeader)
        throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": expected header '" +
                                          std::string(kPromptHeader) + "'");
      seen_header = true;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": unterminated class header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": empty class name");
      if (!names.insert(name).second) throw Error(Errc::DuplicateClassName, name);
      sets.push_back({static_cast<int>(sets.size()), name, {}});
      continue;
    }
    if (sets.empty())
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": description before any class header");
    sets.back().descriptions.emplace_back(line);
  }

  if (!seen_header) throw Error(Errc::ParseError, "missing header '" + std::string(kPromptHeader) + "'");
  if (sets.empty()) throw Error(Errc::ParseError, "document defines no classes");
  for (const auto& s : sets)
    if (s.descriptions.empty()) throw Error(Errc::EmptyClass, s.class_name);
  return sets;
}

std::vector<ClassPromptSet> load_prompt_sets(const std::filesystem::path& path) {
  return parse_prompt_sets(io::read_text(path));
}

std::string format_prompt_sets(const std::vector<ClassPromptSet>& sets) {
  std::string out(kPromptHeader);
  out += '\n';
  for (const auto& s : sets) {
    out += "\n[" + s.class_name + "]\n";
    for (const auto& d : s.descriptions) out += d + '\n';
  }
  return out;
}

TextEmbeddingBank::TextEmbeddingBank(std::vector<BankClass> classes, Eigen::Index dim, std::string provenance)
    : classes_(std::move(classes)), dim_(dim), provenance_(std::move(provenance)) {
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    const auto& k = classes_[c];
    if (k.class_id != static_cast<int>(c))
      throw Error(Errc::ParseError, "class ids must be contiguous from 0");
    if (k.embeddings.dim() != dim_) throw Error(Errc::DimensionMismatch, "class " + k.class_name);
    if (!k.embeddings.normalized()) throw Error(Errc::NotNormalized, "class " + k.class_name);
    if (static_cast<std::size_t>(k.embeddings.rows()) != k.descriptions.size())
      throw Error(Errc::RowCountMismatch, "class " + k.class_name);
  }
}

std::vector<std::string> TextEmbeddingBank::class_names() const {
  std::vector<std::string> names;
  names.reserve(classes_.size());
  for (const auto& c : classes_) names.push_back(c.class_name);
  return names;
}

std::size_t TextEmbeddingBank::total_descriptions() const noexcept {
  std::size_t n = 0;
  for (const auto& c : classes_) n += c.descriptions.size();
  return n;
}

TextEmbeddingBank build_text_bank(const std::vector<ClassPromptSet>& prompt_sets, const EmbeddingMatrix& embeddings,
                                  std::string provenance) {
  std::size_t expected = 0;
  for (const auto& s : prompt_sets) expected += s.descriptions.size();
  if (static_cast<std::size_t>(embeddings.rows()) != expected)
    throw Error(Errc::RowCountMismatch, "embedding rows " + std::to_string(embeddings.rows()) +
                                            " but prompt sets hold " + std::to_string(expected) + " descriptions");

  std::vector<BankClass> classes;
  classes.reserve(prompt_sets.size());
  Eigen::Index offset = 0;
  for (const auto& s : prompt_sets) {
    const auto n = static_cast<Eigen::Index>(s.descriptions.size());
    EmbeddingMatrix slice(embeddings.data().middleRows(offset, n));
    try {
      classes.push_back({s.class_id, s.class_name, s.descriptions, normalize_rows(slice)});
    } catch (const Error& e) {
      throw Error(e.code(), "class '" + s.class_name + "': " + e.what());
    }
    offset += n;
  }
  return TextEmbeddingBank(std::move(classes), embeddings.dim(), std::move(provenance));
}

BankDiagnostics validate_bank(const TextEmbeddingBank& bank) {
  BankDiagnostics report;
  report.dim = bank.dim();
  for (const auto& k : bank.classes()) {
    const auto& m = k.embeddings;
    BankClassDiagnostics d{k.class_id, k.class_name, static_cast<std::size_t>(m.rows()), 0.0, 0.0, std::nullopt};
    if (m.rows() > 0) {
      d.min_norm = d.max_norm = norm64(m.row(0));
      for (Eigen::Index i = 1; i < m.rows(); ++i) {
        const double n = norm64(m.row(i));
        d.min_norm = std::min(d.min_norm, n);
        d.max_norm = std::max(d.max_norm, n);
      }
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < m.rows(); ++j) {
        sum += unit_cosine(m.row(i), m.row(j));
        ++pairs;
        if (m.row(i) == m.row(j))
          report.duplicates.push_back({k.class_id, static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
      }
    }
    if (pairs > 0) d.mean_intra_cosine = sum / static_cast<double>(pairs);
    report.classes.push_back(std::move(d));
  }
  return report;
}


std::vector<ClassPromptSet> prompt_sets_from_sidecar(const Sidecar& sidecar) {
  if (sidecar.kind != RowKind::text) throw Error(Errc::ParseError, "expected a text-kind sidecar");
  std::vector<ClassPromptSet> sets;
  for (std::size_t i = 0; i < sidecar.text_rows.size(); ++i) {
    const auto& r = sidecar.text_rows[i];
    if (sets.empty() || r.class_id != sets.back().class_id) {
      if (r.class_id != static_cast<int>(sets.size()))
        throw Error(Errc::ParseError, "sidecar row " + std::to_string(i) + ": class ids must run 0, 1, ... in order");
      sets.push_back({r.class_id, r.class_name, {}});
    }
    auto& s = sets.back();
    if (r.class_name != s.class_name)
      throw Error(Errc::ParseError, "sidecar row " + std::to_string(i) + ": class name changes within class");
    if (r.description_index != s.descriptions.size())
      throw Error(Errc::ParseError, "sidecar row " + std::to_string(i) + ": description index out of sequence");
    s.descriptions.push_back(r.description_text);
  }
  if (sets.empty()) throw Error(Errc::ParseError, "sidecar defines no classes");
  return sets;
}

Sidecar sidecar_for_prompts(const std::vector<ClassPromptSet>& sets, std::string provenance) {
  Sidecar s;
  s.kind = RowKind::text;
  s.provenance = std::move(provenance);
  for (const auto& c : sets)
    for (std::size_t j = 0; j < c.descriptions.size(); ++j)
      s.text_rows.push_back({c.class_id, c.class_name, j, c.descriptions[j]});
  return s;
}

void check_sidecar_matches(const Sidecar& sidecar, const std::vector<ClassPromptSet>& sets) {
  const auto expected = sidecar_for_prompts(sets, sidecar.provenance);
  if (sidecar.kind != RowKind::text) throw Error(Errc::PromptMismatch, "embedding file is not text-kind");
  if (sidecar.text_rows.size() != expected.text_rows.size())
    throw Error(Errc::RowCountMismatch, "embedding file has " + std::to_string(sidecar.text_rows.size()) +
                                            " rows, prompt document " + std::to_string(expected.text_rows.size()));
  for (std::size_t i = 0; i < expected.text_rows.size(); ++i)
    if (!(sidecar.text_rows[i] == expected.text_rows[i]))
      throw Error(Errc::PromptMismatch, "row " + std::to_string(i) + ": embedding file has '" +
                                            sidecar.text_rows[i].description_text + "', prompt document has '" +
                                            expected.text_rows[i].description_text + "'");
}

void write_bank_file(const TextEmbeddingBank& bank, const std::filesystem::path& path) {
  EmbeddingMatrix::Storage rows(static_cast<Eigen::Index>(bank.total_descriptions()), bank.dim());
  std::vector<ClassPromptSet> sets;
  Eigen::Index offset = 0;
  for (const auto& k : bank.classes()) {
    rows.middleRows(offset, k.embeddings.rows()) = k.embeddings.data();
    offset += k.embeddings.rows();
    sets.push_back({k.class_id, k.class_name, k.descriptions});
  }
  write_embedding_file(EmbeddingMatrix(std::move(rows), true), sidecar_for_prompts(sets, bank.provenance()), path);
}

TextEmbeddingBank read_bank_file(const std::filesystem::path& path) {
  auto file = read_embedding_file(path);
  return build_text_bank(prompt_sets_from_sidecar(file.sidecar), file.matrix, file.sidecar.provenance);
}

}  // namespace zeroleaf
