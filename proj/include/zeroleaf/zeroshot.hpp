#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zeroleaf/promptbank.hpp"
#include "zeroleaf/vecspace.hpp"

namespace zeroleaf {

enum class Aggregation { sum, mean };

std::string_view to_string(Aggregation a) noexcept;
Aggregation parse_aggregation(std::string_view name);

/// Per-class aggregated similarity S_c.
struct ScoreVector {
  Eigen::VectorXd class_scores;
  Aggregation aggregation = Aggregation::sum;
};

struct Prediction {
  int class_id = 0;
  std::string class_name;
  bool tie = false;
};

struct BestDescription {
  int class_id = 0;
  std::size_t description_index = 0;
  double similarity = 0.0;
  std::string text;
};

struct PredictionRecord {
  std::string item_id;
  std::optional<int> true_label;
  int predicted_label = 0;
  ScoreVector scores;
  bool tie = false;
  std::optional<BestDescription> best_description;
};

/// Image embeddings with one id per row.
struct ImageBatch {
  EmbeddingMatrix embeddings;
  std::vector<std::string> item_ids;
  std::vector<std::optional<int>> true_labels;  // empty or one per row
};

struct ClassifyOptions {
  Aggregation aggregation = Aggregation::sum;
  double tie_tolerance = 0.0;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 1;
};

/// S_c = sum_j cos(v, t_c^j) (or its mean over j), j ascending.
ScoreVector aggregate_scores(const EmbeddingVector& image, const TextEmbeddingBank& bank,
                             Aggregation aggregation = Aggregation::sum);

/// Lowest index attaining the maximum; tie when another class is within tie_tolerance of it.
Prediction predict(const ScoreVector& scores, const std::vector<std::string>& class_names,
                   double tie_tolerance = 0.0);

/// Highest single (class, description) cosine; ties go to smaller class, then smaller index.
BestDescription best_description(const EmbeddingVector& image, const TextEmbeddingBank& bank);

/// Full record for one normalized image.
PredictionRecord classify_one(std::string item_id, const EmbeddingVector& image, const TextEmbeddingBank& bank,
                              const ClassifyOptions& options = {});

/// One record per row in input order. Rows are independent and may be processed
/// on several threads; each row is computed exactly as classify_one would.
std::vector<PredictionRecord> classify_batch(const ImageBatch& images, const TextEmbeddingBank& bank,
                                             const ClassifyOptions& options = {});

}  // namespace zeroleaf
