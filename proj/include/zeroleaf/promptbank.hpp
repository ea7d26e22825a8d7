#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zeroleaf/exchange.hpp"
#include "zeroleaf/vecspace.hpp"

namespace zeroleaf {

/// Descriptions of one class, in document order.
struct ClassPromptSet {
  int class_id = 0;
  std::string class_name;
  std::vector<std::string> descriptions;
};

/// Parses a prompt-definition document.
///
/// Layout (one format, version 1):
///
///     zeroleaf-prompts v1
///     # comment
///     [Class name]
///     first description
///     second description
///
/// Every non-blank, non-comment line inside a block is one description,
/// trimmed of surrounding whitespace. Class ids follow block order from 0.
std::vector<ClassPromptSet> parse_prompt_sets(std::string_view text);
std::vector<ClassPromptSet> load_prompt_sets(const std::filesystem::path& path);

/// Renders prompt sets back into the document format.
std::string format_prompt_sets(const std::vector<ClassPromptSet>& sets);

/// One class inside a text bank: its normalized prompt embeddings, row j
/// belonging to descriptions[j].
struct BankClass {
  int class_id = 0;
  std::string class_name;
  std::vector<std::string> descriptions;
  EmbeddingMatrix embeddings;
};

/// Immutable normalized text-embedding bank, built once per prompt document.
class TextEmbeddingBank {
 public:
  TextEmbeddingBank(std::vector<BankClass> classes, Eigen::Index dim, std::string provenance);

  std::size_t num_classes() const noexcept { return classes_.size(); }
  Eigen::Index dim() const noexcept { return dim_; }
  const std::string& provenance() const noexcept { return provenance_; }
  const std::vector<BankClass>& classes() const noexcept { return classes_; }
  const BankClass& at(std::size_t c) const { return classes_.at(c); }
  std::vector<std::string> class_names() const;
  std::size_t total_descriptions() const noexcept;

 private:
  std::vector<BankClass> classes_;
  Eigen::Index dim_;
  std::string provenance_;
};

/// Slices class-major embedding rows into a bank, re-normalizing every row.
TextEmbeddingBank build_text_bank(const std::vector<ClassPromptSet>& prompt_sets,
                                  const EmbeddingMatrix& embeddings, std::string provenance);

struct DuplicateRowWarning {
  int class_id;
  std::size_t first_index;
  std::size_t second_index;
};

struct BankClassDiagnostics {
  int class_id;
  std::string class_name;
  std::size_t descriptions;
  double min_norm;
  double max_norm;
  /// Mean pairwise cosine between distinct prompts; empty when N_c = 1.
  std::optional<double> mean_intra_cosine;
};

struct BankDiagnostics {
  Eigen::Index dim = 0;
  std::vector<BankClassDiagnostics> classes;
  std::vector<DuplicateRowWarning> duplicates;
};

BankDiagnostics validate_bank(const TextEmbeddingBank& bank);

/// Prompt sets described by a text-kind sidecar. Rows must be class-major with
/// class ids from 0 and description indices from 0 within each class.
std::vector<ClassPromptSet> prompt_sets_from_sidecar(const Sidecar& sidecar);
Sidecar sidecar_for_prompts(const std::vector<ClassPromptSet>& sets, std::string provenance);

/// Throws PromptMismatch unless the sidecar rows describe exactly these prompts.
void check_sidecar_matches(const Sidecar& sidecar, const std::vector<ClassPromptSet>& sets);

/// A bank on disk is a normalized text-kind ZSEB file.
void write_bank_file(const TextEmbeddingBank& bank, const std::filesystem::path& path);
TextEmbeddingBank read_bank_file(const std::filesystem::path& path);

}  // namespace zeroleaf
