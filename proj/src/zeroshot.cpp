#include "zeroleaf/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_set>

namespace zeroleaf {

std::string_view to_string(Aggregation a) noexcept { return a == Aggregation::sum ? "sum" : "mean"; }

Aggregation parse_aggregation(std::string_view name) {
  if (name == "sum") return Aggregation::sum;
  if (name == "mean") return Aggregation::mean;
  throw Error(Errc::ParseError, "unknown aggregation '" + std::string(name) + "'");
}

namespace {

void check_image(const EmbeddingVector& image, const TextEmbeddingBank& bank) {
  if (image.dim() != bank.dim())
    throw Error(Errc::DimensionMismatch,
                "image dim " + std::to_string(image.dim()) + ", bank dim " + std::to_string(bank.dim()));
  if (!image.normalized()) throw Error(Errc::NotNormalized, "image embedding must be normalized");
}

}  // namespace

ScoreVector aggregate_scores(const EmbeddingVector& image, const TextEmbeddingBank& bank, Aggregation aggregation) {
  check_image(image, bank);
  ScoreVector out{Eigen::VectorXd(static_cast<Eigen::Index>(bank.num_classes())), aggregation};
  for (std::size_t c = 0; c < bank.num_classes(); ++c) {
    const auto& prompts = bank.at(c).embeddings;
    double s = 0.0;
    for (Eigen::Index j = 0; j < prompts.rows(); ++j) s += unit_cosine(image.values(), prompts.row(j).transpose());
    if (aggregation == Aggregation::mean) s /= static_cast<double>(prompts.rows());
    out.class_scores(static_cast<Eigen::Index>(c)) = s;
  }
  return out;
}

Prediction predict(const ScoreVector& scores, const std::vector<std::string>& class_names, double tie_tolerance) {
  const auto& s = scores.class_scores;
  if (s.size() == 0) throw Error(Errc::EmptyScores, "no class scores");
  if (!class_names.empty() && class_names.size() != static_cast<std::size_t>(s.size()))
    throw Error(Errc::LengthMismatch, "class names vs scores");
  for (Eigen::Index c = 0; c < s.size(); ++c)
    if (!std::isfinite(s(c))) throw Error(Errc::NonFiniteScore, "class " + std::to_string(c));

  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < s.size(); ++c)
    if (s(c) > s(best)) best = c;

  bool tie = false;
  for (Eigen::Index c = 0; c < s.size(); ++c)
    if (c != best && s(best) - s(c) <= tie_tolerance) tie = true;

  Prediction p;
  p.class_id = static_cast<int>(best);
  p.class_name = class_names.empty() ? std::string() : class_names[static_cast<std::size_t>(best)];
  p.tie = tie;
  return p;
}

BestDescription best_description(const EmbeddingVector& image, const TextEmbeddingBank& bank) {
  check_image(image, bank);
  BestDescription best;
  bool found = false;
  for (std::size_t c = 0; c < bank.num_classes(); ++c) {
    const auto& k = bank.at(c);
    for (Eigen::Index j = 0; j < k.embeddings.rows(); ++j) {
      const double sim = unit_cosine(image.values(), k.embeddings.row(j).transpose());
      if (!found || sim > best.similarity) {
        best = {k.class_id, static_cast<std::size_t>(j), sim, {}};
        found = true;
      }
    }
  }
  best.text = bank.at(static_cast<std::size_t>(best.class_id)).descriptions.at(best.description_index);
  return best;
}

PredictionRecord classify_one(std::string item_id, const EmbeddingVector& image, const TextEmbeddingBank& bank,
                              const ClassifyOptions& options) {
  PredictionRecord r;
  r.item_id = std::move(item_id);
  r.scores = aggregate_scores(image, bank, options.aggregation);
  const auto p = predict(r.scores, {}, options.tie_tolerance);
  r.predicted_label = p.class_id;
  r.tie = p.tie;
  r.best_description = best_description(image, bank);
  return r;
}

std::vector<PredictionRecord> classify_batch(const ImageBatch& images, const TextEmbeddingBank& bank,
                                             const ClassifyOptions& options) {
  const auto n = static_cast<std::size_t>(images.embeddings.rows());
  if (images.item_ids.size() != n) throw Error(Errc::LengthMismatch, "item ids vs embedding rows");
  if (!images.true_labels.empty() && images.true_labels.size() != n)
    throw Error(Errc::LengthMismatch, "true labels vs embedding rows");
  if (images.embeddings.dim() != bank.dim())
    throw Error(Errc::DimensionMismatch, "image dim " + std::to_string(images.embeddings.dim()) + ", bank dim " +
                                             std::to_string(bank.dim()));
  if (!images.embeddings.normalized()) throw Error(Errc::NotNormalized, "image batch must be normalized");
  std::unordered_set<std::string> seen;
  for (const auto& id : images.item_ids)
    if (!seen.insert(id).second) throw Error(Errc::DuplicateItemId, id);

  std::vector<PredictionRecord> records(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      records[i] = classify_one(images.item_ids[i], images.embeddings.vector(static_cast<Eigen::Index>(i)), bank,
                                options);
      if (!images.true_labels.empty()) records[i].true_label = images.true_labels[i];
    }
  };

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n / 64, 1)));
  if (threads <= 1) {
    work(0, n);
    return records;
  }
  // Errors inside workers are rethrown on the calling thread, first chunk wins.
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(n, begin + chunk);
      pool.emplace_back([&, t, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

}  // namespace zeroleaf
