#pragma once

// Dataset manifests, stratified fold plans, external score ingestion and
// evaluation runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zeroleaf/metrics.hpp"
#include "zeroleaf/promptbank.hpp"
#include "zeroleaf/zeroshot.hpp"

namespace zeroleaf {

/// "path#row": row `row` of a ZSEB file, path relative to the manifest.
struct EmbeddingRef {
  std::filesystem::path file;
  std::uint64_t row = 0;
};

struct ManifestEntry {
  std::string item_id;
  std::string source;
  int true_label = 0;
  std::optional<EmbeddingRef> embedding;
};

/// Labelled image inventory.
///
///     zeroleaf-manifest v1
///     classes<TAB>Early Blight<TAB>Late Blight<TAB>Healthy
///     img0001<TAB>Farmy<TAB>Late Blight<TAB>field.zseb#0
///
/// Columns: item id, source tag, class name, embedding locator ("-" when the
/// item is only evaluated through external scores).
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
  std::size_t size() const noexcept { return entries.size(); }
  std::vector<int> labels() const;
  /// Distinct source tags in order of first appearance.
  std::vector<std::string> sources() const;
};

struct ManifestTally {
  std::vector<std::string> sources;
  std::vector<std::vector<std::int64_t>> per_source;  // [source][class]
  std::vector<std::int64_t> overall;                  // [class]
  std::int64_t total = 0;

  std::int64_t source_total(std::size_t s) const;
};

DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {});
std::string format_manifest(const DatasetManifest& manifest);
/// Parses and checks that every embedding locator points at an existing row.
DatasetManifest load_manifest(const std::filesystem::path& path);
void check_embedding_refs(const DatasetManifest& manifest);
ManifestTally tally(const DatasetManifest& manifest);

/// Gathers every entry's embedding row, in manifest order.
EmbeddingMatrix load_manifest_embeddings(const DatasetManifest& manifest);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> item_ids;  // manifest order
  std::vector<int> folds;             // fold index per item
  std::vector<std::string> warnings;

  std::vector<std::size_t> members(int fold) const;
};

/// Per class: shuffle that class's items with a generator seeded by
/// (seed, class id), then deal them round-robin, continuing from the fold
/// where the previous class stopped.
FoldPlan stratified_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed = 42);

std::string format_fold_plan(const FoldPlan& plan);
FoldPlan parse_fold_plan(std::string_view text, const DatasetManifest& manifest);

/// Score file:
///
///     zeroleaf-scores v1
///     classes<TAB>Early Blight<TAB>Late Blight<TAB>Healthy
///     img0001<TAB>-1.2<TAB>3.4<TAB>0.1
///
/// Returns an N x C matrix aligned to manifest order.
Eigen::MatrixXd parse_external_scores(std::string_view text, const DatasetManifest& manifest);
Eigen::MatrixXd ingest_external_scores(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string format_external_scores(const Eigen::MatrixXd& scores, const DatasetManifest& manifest);

enum class RunMode { zero_shot_single, external_scores_kfold };
std::string_view to_string(RunMode mode) noexcept;
RunMode parse_run_mode(std::string_view name);

struct ZeroShotSource {
  const TextEmbeddingBank* bank = nullptr;
  /// One row per manifest entry; normalized here if needed.
  EmbeddingMatrix images;
};

struct ExternalSource {
  Eigen::MatrixXd scores;
};

using ScoreSource = std::variant<ZeroShotSource, ExternalSource>;

struct RunOptions {
  std::string run_id = "run";
  std::string model;
  std::string group;
  ClassifyOptions classify;
  bool one_vs_rest_mcc = false;
};

struct CrossFoldMean {
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double mcc = 0.0;
  double macro_auc = 0.0;
};

struct SourceMetrics {
  std::string source;
  MetricsReport metrics;
};

struct RunResult {
  std::string run_id;
  std::string model;
  std::string group;
  RunMode mode = RunMode::zero_shot_single;
  std::optional<Aggregation> aggregation;
  std::optional<int> k;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> class_names;
  std::vector<MetricsReport> folds;
  std::vector<std::size_t> fold_sizes;
  CrossFoldMean fold_mean;
  std::vector<SourceMetrics> per_source;
  MetricsReport overall;
  /// File holding the prediction records, relative to the result file.
  std::string predictions;
  /// In-memory records (manifest order); not part of the result document.
  std::vector<PredictionRecord> records;
};

CrossFoldMean mean_over_folds(const std::vector<MetricsReport>& folds);

/// Zero-shot sources run once over every item and take no plan; external
/// sources need a plan and are scored per fold.
RunResult run_evaluation(const DatasetManifest& manifest, const ScoreSource& source,
                         const std::optional<FoldPlan>& plan, const RunOptions& options = {});

}  // namespace zeroleaf
