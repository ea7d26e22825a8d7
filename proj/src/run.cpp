#include <cmath>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "fileio.hpp"
#include "textutil.hpp"
#include "zeroleaf/harness.hpp"

namespace zeroleaf {

namespace {

constexpr std::string_view kScoresHeader = "zeroleaf-scores v1";

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
  return out;
}

MetricsReport metrics_for(const std::vector<std::size_t>& items, const std::vector<int>& y_true,
                          const std::vector<int>& y_pred, const Eigen::MatrixXd& scores, const MetricsOptions& opts) {
  std::vector<int> t, p;
  Eigen::MatrixXd s(static_cast<Eigen::Index>(items.size()), scores.cols());
  for (std::size_t r = 0; r < items.size(); ++r) {
    t.push_back(y_true[items[r]]);
    p.push_back(y_pred[items[r]]);
    s.row(static_cast<Eigen::Index>(r)) = scores.row(static_cast<Eigen::Index>(items[r]));
  }
  return evaluate_metrics(t, p, s, opts);
}

}  // namespace

Eigen::MatrixXd parse_external_scores(std::string_view text, const DatasetManifest& manifest) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!text::trim(line).empty() && line.front() != '#') return true;
    }
    return false;
  };
  const auto where = [&] { return "scores line " + std::to_string(line_no); };

  if (!next() || text::trim(line) != kScoresHeader) throw Error(Errc::ParseError, where() + ": expected header");
  if (!next()) throw Error(Errc::ParseError, "missing classes line");
  const auto header = text::split_tabs(line);
  if (header.size() < 2 || header[0] != "classes") throw Error(Errc::ParseError, where() + ": expected classes line");
  const auto C = static_cast<Eigen::Index>(header.size() - 1);
  if (C != manifest.num_classes())
    throw Error(Errc::ColumnCountMismatch, "score file has " + std::to_string(C) + " classes, manifest " +
                                               std::to_string(manifest.num_classes()));

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest.entries[i].item_id, i);
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(manifest.size()), C);
  std::vector<bool> filled(manifest.size(), false);
  std::vector<std::string> extra;
  while (next()) {
    const auto f = text::split_tabs(line);
    if (static_cast<Eigen::Index>(f.size()) != C + 1)
      throw Error(Errc::ColumnCountMismatch, where() + ": " + std::to_string(f.size() - 1) + " scores, expected " +
                                                 std::to_string(C));
    const auto it = index.find(f[0]);
    if (it == index.end()) {
      extra.push_back(f[0]);
      continue;
    }
    if (filled[it->second]) throw Error(Errc::DuplicateItemId, f[0]);
    for (Eigen::Index c = 0; c < C; ++c) {
      const auto v = text::parse_double(f[static_cast<std::size_t>(c) + 1]);
      if (!v) throw Error(Errc::ParseError, where() + ": bad number '" + f[static_cast<std::size_t>(c) + 1] + "'");
      if (!std::isfinite(*v)) throw Error(Errc::NonFiniteScore, where() + ": item " + f[0]);
      scores(static_cast<Eigen::Index>(it->second), c) = *v;
    }
    filled[it->second] = true;
  }
  if (!extra.empty()) throw Error(Errc::ExtraRows, join_ids(extra));
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (!filled[i]) missing.push_back(manifest.entries[i].item_id);
  if (!missing.empty()) throw Error(Errc::MissingRows, join_ids(missing));
  return scores;
}

Eigen::MatrixXd ingest_external_scores(const std::filesystem::path& path, const DatasetManifest& manifest) {
  return parse_external_scores(io::read_text(path), manifest);
}

std::string format_external_scores(const Eigen::MatrixXd& scores, const DatasetManifest& manifest) {
  std::string out(kScoresHeader);
  out += "\nclasses";
  for (const auto& c : manifest.class_names) out += "\t" + c;
  out += "\n";
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    out += manifest.entries[i].item_id;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) out += fmt::format("\t{}", scores(static_cast<Eigen::Index>(i), c));
    out += "\n";
  }
  return out;
}

std::string_view to_string(RunMode mode) noexcept {
  return mode == RunMode::zero_shot_single ? "zero_shot_single" : "external_scores_kfold";
}

RunMode parse_run_mode(std::string_view name) {
  if (name == "zero_shot_single" || name == "zero-shot") return RunMode::zero_shot_single;
  if (name == "external_scores_kfold" || name == "external") return RunMode::external_scores_kfold;
  throw Error(Errc::ParseError, "unknown run mode '" + std::string(name) + "'");
}

CrossFoldMean mean_over_folds(const std::vector<MetricsReport>& folds) {
  CrossFoldMean m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.macro_precision += f.macro_precision;
    m.macro_recall += f.macro_recall;
    m.macro_f1 += f.macro_f1;
    m.mcc += f.mcc;
    m.macro_auc += f.macro_auc;
  }
  const auto n = static_cast<double>(folds.size());
  m.macro_precision /= n;
  m.macro_recall /= n;
  m.macro_f1 /= n;
  m.mcc /= n;
  m.macro_auc /= n;
  return m;
}

RunResult run_evaluation(const DatasetManifest& manifest, const ScoreSource& source,
                         const std::optional<FoldPlan>& plan, const RunOptions& options) {
  const auto n = manifest.size();
  if (n == 0) throw Error(Errc::LengthMismatch, "manifest has no entries");
  const int C = manifest.num_classes();

  RunResult result;
  result.run_id = options.run_id;
  result.model = options.model;
  result.group = options.group;
  result.class_names = manifest.class_names;

  const auto y_true = manifest.labels();
  std::vector<int> y_pred(n);
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), C);

  if (const auto* zs = std::get_if<ZeroShotSource>(&source)) {
    if (plan) throw Error(Errc::ModeMismatch, "zero-shot runs are single-pass and take no fold plan");
    if (!zs->bank) throw Error(Errc::ModeMismatch, "zero-shot run without a text bank");
    if (static_cast<int>(zs->bank->num_classes()) != C)
      throw Error(Errc::ColumnCountMismatch, "bank has " + std::to_string(zs->bank->num_classes()) +
                                                 " classes, manifest " + std::to_string(C));
    if (static_cast<std::size_t>(zs->images.rows()) != n)
      throw Error(Errc::LengthMismatch, "image rows vs manifest entries");
    result.mode = RunMode::zero_shot_single;
    result.aggregation = options.classify.aggregation;

    ImageBatch batch{zs->images.normalized() ? zs->images : normalize_rows(zs->images), {}, {}};
    for (const auto& e : manifest.entries) {
      batch.item_ids.push_back(e.item_id);
      batch.true_labels.emplace_back(e.true_label);
    }
    result.records = classify_batch(batch, *zs->bank, options.classify);
  } else {
    const auto& ext = std::get<ExternalSource>(source);
    if (!plan) throw Error(Errc::ModeMismatch, "external-score runs need a fold plan");
    if (static_cast<std::size_t>(ext.scores.rows()) != n) throw Error(Errc::LengthMismatch, "score rows vs manifest");
    if (ext.scores.cols() != C) throw Error(Errc::ColumnCountMismatch, "score columns vs manifest classes");
    result.mode = RunMode::external_scores_kfold;
    result.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = result.records[i];
      r.item_id = manifest.entries[i].item_id;
      r.true_label = manifest.entries[i].true_label;
      r.scores = {ext.scores.row(static_cast<Eigen::Index>(i)).transpose(), Aggregation::sum};
      const auto p = predict(r.scores, {}, options.classify.tie_tolerance);
      r.predicted_label = p.class_id;
      r.tie = p.tie;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    y_pred[i] = result.records[i].predicted_label;
    scores.row(static_cast<Eigen::Index>(i)) = result.records[i].scores.class_scores.transpose();
  }

  MetricsOptions all{MacroPolicy::all_classes, options.one_vs_rest_mcc, true};
  std::vector<std::size_t> everything(n);
  for (std::size_t i = 0; i < n; ++i) everything[i] = i;
  result.overall = metrics_for(everything, y_true, y_pred, scores, all);

  if (result.mode == RunMode::zero_shot_single) {
    result.folds = {result.overall};
    result.fold_sizes = {n};
  } else {
    if (plan->item_ids.size() != n) throw Error(Errc::LengthMismatch, "fold plan vs manifest");
    for (std::size_t i = 0; i < n; ++i)
      if (plan->item_ids[i] != manifest.entries[i].item_id)
        throw Error(Errc::ParseError, "fold plan order differs from manifest at " + plan->item_ids[i]);
    result.k = plan->k;
    result.seed = plan->seed;
    for (int f = 0; f < plan->k; ++f) {
      const auto members = plan->members(f);
      if (members.empty()) throw Error(Errc::InvalidK, "fold " + std::to_string(f) + " is empty");
      result.folds.push_back(metrics_for(members, y_true, y_pred, scores, all));
      result.fold_sizes.push_back(members.size());
    }
  }
  result.fold_mean = mean_over_folds(result.folds);

  MetricsOptions present{MacroPolicy::present_classes, options.one_vs_rest_mcc, false};
  for (const auto& s : manifest.sources()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (manifest.entries[i].source == s) members.push_back(i);
    result.per_source.push_back({s, metrics_for(members, y_true, y_pred, scores, present)});
  }
  return result;
}

}  // namespace zeroleaf
