#include "zeroleaf/report.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "fileio.hpp"
#include "json.hpp"

namespace zeroleaf {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kKfoldNote =
    "external_scores_kfold: the scored evaluation set is partitioned into stratified folds and each fold is "
    "scored separately; models are not retrained per fold, so fold metrics describe dispersion over "
    "evaluation subsets. Cross-fold values are unweighted means of the per-fold values.";
constexpr std::string_view kZeroShotNote =
    "zero_shot_single: one pass over every item with a text bank built once; no cross-validation.";

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json metrics_to_json(const MetricsReport& m) {
  json j;
  const auto& counts = m.confusion.counts();
  auto grid = json::array();
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    auto row = json::array();
    for (Eigen::Index c = 0; c < counts.cols(); ++c) row.push_back(counts(r, c));
    grid.push_back(std::move(row));
  }
  j["confusion"] = std::move(grid);
  j["support"] = m.support;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["macro_classes"] = m.macro_classes;
  j["mcc"] = m.mcc;
  j["mcc_ovr_macro"] = optional_json(m.mcc_ovr_macro);
  auto aucs = json::array();
  for (const auto& a : m.per_class_auc) aucs.push_back(optional_json(a));
  j["per_class_auc"] = std::move(aucs);
  j["macro_auc"] = m.macro_auc;
  auto roc = json::array();
  for (const auto& curve : m.roc) {
    auto pts = json::array();
    for (const auto& p : curve) pts.push_back(json::array({p.fpr, p.tpr}));
    roc.push_back(std::move(pts));
  }
  j["roc"] = std::move(roc);
  auto flags = json::array();
  for (const auto& f : m.degenerate_flags) flags.push_back({{"class_id", f.class_id}, {"what", f.what}});
  j["degenerate_flags"] = std::move(flags);
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  const auto& grid = j.at("confusion");
  const auto C = static_cast<Eigen::Index>(grid.size());
  CountMatrix counts(C, C);
  for (Eigen::Index r = 0; r < C; ++r)
    for (Eigen::Index c = 0; c < C; ++c) counts(r, c) = grid.at(r).at(c).get<std::int64_t>();
  m.confusion = ConfusionMatrix(std::move(counts));
  m.support = j.at("support").get<std::vector<std::int64_t>>();
  m.precision = j.at("precision").get<std::vector<double>>();
  m.recall = j.at("recall").get<std::vector<double>>();
  m.f1 = j.at("f1").get<std::vector<double>>();
  m.macro_precision = j.at("macro_precision").get<double>();
  m.macro_recall = j.at("macro_recall").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.macro_classes = j.at("macro_classes").get<std::vector<int>>();
  m.mcc = j.at("mcc").get<double>();
  if (!j.at("mcc_ovr_macro").is_null()) m.mcc_ovr_macro = j.at("mcc_ovr_macro").get<double>();
  for (const auto& a : j.at("per_class_auc"))
    m.per_class_auc.push_back(a.is_null() ? std::nullopt : std::optional<double>(a.get<double>()));
  m.macro_auc = j.at("macro_auc").get<double>();
  for (const auto& curve : j.at("roc")) {
    RocCurve c;
    for (const auto& p : curve) c.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    m.roc.push_back(std::move(c));
  }
  for (const auto& f : j.at("degenerate_flags"))
    m.degenerate_flags.push_back({f.at("class_id").get<int>(), f.at("what").get<std::string>()});
  return m;
}

json fold_mean_json(const CrossFoldMean& m) {
  return {{"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"mcc", m.mcc},
          {"macro_auc", m.macro_auc}};
}

std::string model_label(const RunResult& r) { return r.model.empty() ? r.run_id : r.model; }
std::string group_label(const RunResult& r) { return r.group.empty() ? "-" : r.group; }

std::string class_label(const RunResult& r, int c) {
  if (c >= 0 && static_cast<std::size_t>(c) < r.class_names.size()) return r.class_names[static_cast<std::size_t>(c)];
  return std::to_string(c);
}

template <typename F>
json parse_guard(std::string_view text, F&& body) {
  try {
    return body(json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

}  // namespace

std::string predictions_to_json(const std::vector<PredictionRecord>& records,
                                const std::vector<std::string>& class_names) {
  json j;
  j["format"] = "zeroleaf-predictions";
  j["version"] = 1;
  j["class_names"] = class_names;
  auto rows = json::array();
  for (const auto& r : records) {
    json row;
    row["item_id"] = r.item_id;
    row["true_label"] = optional_json(r.true_label);
    row["predicted_label"] = r.predicted_label;
    row["predicted_class"] = static_cast<std::size_t>(r.predicted_label) < class_names.size()
                                 ? json(class_names[static_cast<std::size_t>(r.predicted_label)])
                                 : json(nullptr);
    row["aggregation"] = std::string(to_string(r.scores.aggregation));
    row["scores"] = std::vector<double>(r.scores.class_scores.data(),
                                        r.scores.class_scores.data() + r.scores.class_scores.size());
    row["tie"] = r.tie;
    if (r.best_description) {
      const auto& b = *r.best_description;
      row["best_description"] = {{"class_id", b.class_id},
                                 {"description_index", b.description_index},
                                 {"similarity", b.similarity},
                                 {"text", b.text}};
    } else {
      row["best_description"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  j["records"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::vector<PredictionRecord> predictions_from_json(std::string_view text) {
  std::vector<PredictionRecord> out;
  parse_guard(text, [&](const json& j) {
    if (j.at("format") != "zeroleaf-predictions") throw Error(Errc::ParseError, "not a predictions document");
    for (const auto& row : j.at("records")) {
      PredictionRecord r;
      r.item_id = row.at("item_id").get<std::string>();
      if (!row.at("true_label").is_null()) r.true_label = row.at("true_label").get<int>();
      r.predicted_label = row.at("predicted_label").get<int>();
      r.scores.aggregation = parse_aggregation(row.at("aggregation").get<std::string>());
      const auto s = row.at("scores").get<std::vector<double>>();
      r.scores.class_scores = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
      r.tie = row.at("tie").get<bool>();
      if (const auto& b = row.at("best_description"); !b.is_null())
        r.best_description = BestDescription{b.at("class_id").get<int>(), b.at("description_index").get<std::size_t>(),
                                             b.at("similarity").get<double>(), b.at("text").get<std::string>()};
      out.push_back(std::move(r));
    }
    return json();
  });
  return out;
}

std::string run_result_to_json(const RunResult& r) {
  json j;
  j["format"] = "zeroleaf-run";
  j["version"] = 1;
  j["run_id"] = r.run_id;
  j["model"] = r.model;
  j["group"] = r.group;
  j["mode"] = std::string(to_string(r.mode));
  j["note"] = std::string(r.mode == RunMode::zero_shot_single ? kZeroShotNote : kKfoldNote);
  j["aggregation"] = r.aggregation ? json(std::string(to_string(*r.aggregation))) : json(nullptr);
  j["k"] = optional_json(r.k);
  j["seed"] = optional_json(r.seed);
  j["class_names"] = r.class_names;
  j["predictions"] = r.predictions;
  j["fold_sizes"] = r.fold_sizes;
  auto folds = json::array();
  for (const auto& f : r.folds) folds.push_back(metrics_to_json(f));
  j["folds"] = std::move(folds);
  j["fold_mean"] = fold_mean_json(r.fold_mean);
  j["overall"] = metrics_to_json(r.overall);
  auto sources = json::array();
  for (const auto& s : r.per_source) sources.push_back({{"source", s.source}, {"metrics", metrics_to_json(s.metrics)}});
  j["per_source"] = std::move(sources);
  return j.dump(2) + "\n";
}

RunResult run_result_from_json(std::string_view text) {
  RunResult r;
  parse_guard(text, [&](const json& j) {
    if (j.at("format") != "zeroleaf-run") throw Error(Errc::ParseError, "not a run result document");
    r.run_id = j.at("run_id").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.group = j.at("group").get<std::string>();
    r.mode = parse_run_mode(j.at("mode").get<std::string>());
    if (!j.at("aggregation").is_null()) r.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    if (!j.at("k").is_null()) r.k = j.at("k").get<int>();
    if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.predictions = j.at("predictions").get<std::string>();
    r.fold_sizes = j.at("fold_sizes").get<std::vector<std::size_t>>();
    for (const auto& f : j.at("folds")) r.folds.push_back(metrics_from_json(f));
    const auto& m = j.at("fold_mean");
    r.fold_mean = {m.at("macro_precision").get<double>(), m.at("macro_recall").get<double>(),
                   m.at("macro_f1").get<double>(), m.at("mcc").get<double>(), m.at("macro_auc").get<double>()};
    r.overall = metrics_from_json(j.at("overall"));
    for (const auto& s : j.at("per_source"))
      r.per_source.push_back({s.at("source").get<std::string>(), metrics_from_json(s.at("metrics"))});
    return json();
  });
  return r;
}

void save_run_result(RunResult& result, const std::filesystem::path& path) {
  auto preds = path.stem();
  preds += ".predictions.json";
  result.predictions = preds.string();
  io::write_atomic(path.parent_path() / preds, predictions_to_json(result.records, result.class_names));
  io::write_atomic(path, run_result_to_json(result));
}

RunResult load_run_result(const std::filesystem::path& path) {
  auto r = run_result_from_json(io::read_text(path));
  if (!r.predictions.empty()) r.records = predictions_from_json(io::read_text(path.parent_path() / r.predictions));
  return r;
}

std::string format_percent(double fraction) { return fmt::format("{:.2f}", fraction * 100.0); }

std::string render_summary_table(const std::vector<RunResult>& results) {
  std::string out = "Group | Model | Macro Precision | Macro Recall | Macro F1-score\n";
  for (const auto& r : results)
    out += fmt::format("{} | {} | {} | {} | {}\n", group_label(r), model_label(r),
                       format_percent(r.fold_mean.macro_precision), format_percent(r.fold_mean.macro_recall),
                       format_percent(r.fold_mean.macro_f1));
  return out;
}

std::string render_summary_tsv(const std::vector<RunResult>& results) {
  std::string out = "Group\tModel\tMacro Precision\tMacro Recall\tMacro F1-score\tMCC\tMacro AUC\n";
  for (const auto& r : results)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{:.3f}\t{:.2f}\n", group_label(r), model_label(r),
                       format_percent(r.fold_mean.macro_precision), format_percent(r.fold_mean.macro_recall),
                       format_percent(r.fold_mean.macro_f1), r.fold_mean.mcc, r.fold_mean.macro_auc);
  return out;
}

std::string render_folds_tsv(const std::vector<RunResult>& results) {
  std::string out = "run_id\tmodel\tmode\tfold\titems\tmacro_precision\tmacro_recall\tmacro_f1\tmcc\tmacro_auc\n";
  for (const auto& r : results)
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& m = r.folds[f];
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.run_id, model_label(r), to_string(r.mode), f,
                         f < r.fold_sizes.size() ? r.fold_sizes[f] : 0, m.macro_precision, m.macro_recall,
                         m.macro_f1, m.mcc, m.macro_auc);
    }
  return out;
}

std::string render_text_report(const std::vector<RunResult>& results) {
  std::string out = "Evaluation report\n\n";
  out += render_summary_table(results);
  for (const auto& r : results) {
    out += fmt::format("\n== {} (run {}, {}) ==\n", model_label(r), r.run_id, to_string(r.mode));
    out += std::string(r.mode == RunMode::zero_shot_single ? kZeroShotNote : kKfoldNote) + "\n";

    out += "\nPer-fold metrics\nfold | items | macro P | macro R | macro F1 | MCC | macro AUC\n";
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& m = r.folds[f];
      out += fmt::format("{} | {} | {} | {} | {} | {:.3f} | {:.3f}\n", f, f < r.fold_sizes.size() ? r.fold_sizes[f] : 0,
                         format_percent(m.macro_precision), format_percent(m.macro_recall),
                         format_percent(m.macro_f1), m.mcc, m.macro_auc);
    }
    out += fmt::format("mean | - | {} | {} | {} | {:.3f} | {:.3f}\n", format_percent(r.fold_mean.macro_precision),
                       format_percent(r.fold_mean.macro_recall), format_percent(r.fold_mean.macro_f1),
                       r.fold_mean.mcc, r.fold_mean.macro_auc);

    const auto& o = r.overall;
    const auto& counts = o.confusion.counts();
    out += "\nConfusion matrix (rows = true, columns = predicted)\n";
    for (Eigen::Index t = 0; t < counts.rows(); ++t) {
      out += fmt::format("{:>3}", t);
      for (Eigen::Index p = 0; p < counts.cols(); ++p) out += fmt::format(" {:>6}", counts(t, p));
      out += "  " + class_label(r, static_cast<int>(t)) + "\n";
    }

    out += "\nclass | precision | recall | F1 | AUC\n";
    for (std::size_t c = 0; c < o.precision.size(); ++c) {
      const auto auc_text = c < o.per_class_auc.size() && o.per_class_auc[c]
                                ? fmt::format("{:.4f}", *o.per_class_auc[c])
                                : std::string("n/a");
      out += fmt::format("{} | {} | {} | {} | {}\n", class_label(r, static_cast<int>(c)), format_percent(o.precision[c]),
                         format_percent(o.recall[c]), format_percent(o.f1[c]), auc_text);
    }
    out += fmt::format("macro AUC: {:.4f}\nMCC: {:.4f}\n", o.macro_auc, o.mcc);
    if (o.mcc_ovr_macro) out += fmt::format("one-vs-rest macro MCC: {:.4f}\n", *o.mcc_ovr_macro);
    for (const auto& f : o.degenerate_flags)
      out += fmt::format("flag: {}: {}\n", f.class_id < 0 ? std::string("all") : class_label(r, f.class_id), f.what);

    out += "\nPer-source breakdown\nsource | items | macro P | macro R | macro F1 | MCC | macro AUC | excluded\n";
    for (const auto& s : r.per_source) {
      const auto& m = s.metrics;
      std::string excluded;
      for (std::size_t c = 0; c < m.support.size(); ++c)
        if (std::find(m.macro_classes.begin(), m.macro_classes.end(), static_cast<int>(c)) == m.macro_classes.end())
          excluded += (excluded.empty() ? "" : ", ") + class_label(r, static_cast<int>(c));
      out += fmt::format("{} | {} | {} | {} | {} | {:.3f} | {:.3f} | {}\n", s.source, m.confusion.total(),
                         format_percent(m.macro_precision), format_percent(m.macro_recall),
                         format_percent(m.macro_f1), m.mcc, m.macro_auc, excluded.empty() ? "-" : excluded);
    }

    const bool any_best = std::any_of(r.records.begin(), r.records.end(),
                                      [](const auto& rec) { return rec.best_description.has_value(); });
    if (any_best) {
      out += "\nBest-matching descriptions\nitem | true | predicted | best class | index | similarity | text\n";
      for (const auto& rec : r.records) {
        if (!rec.best_description) continue;
        const auto& b = *rec.best_description;
        out += fmt::format("{} | {} | {} | {} | {} | {:.4f} | {}\n", rec.item_id,
                           rec.true_label ? class_label(r, *rec.true_label) : std::string("-"),
                           class_label(r, rec.predicted_label), class_label(r, b.class_id), b.description_index,
                           b.similarity, b.text);
      }
    }
  }
  return out;
}

std::string render_report_json(const std::vector<RunResult>& results) {
  json j;
  j["format"] = "zeroleaf-report";
  j["version"] = 1;
  auto summary = json::array();
  for (const auto& r : results)
    summary.push_back({{"group", r.group},
                       {"model", model_label(r)},
                       {"macro_precision", r.fold_mean.macro_precision},
                       {"macro_recall", r.fold_mean.macro_recall},
                       {"macro_f1", r.fold_mean.macro_f1},
                       {"mcc", r.fold_mean.mcc},
                       {"macro_auc", r.fold_mean.macro_auc}});
  j["summary"] = std::move(summary);
  auto runs = json::array();
  for (const auto& r : results) {
    auto run = json::parse(run_result_to_json(r));
    auto appendix = json::array();
    for (const auto& rec : r.records) {
      if (!rec.best_description) continue;
      const auto& b = *rec.best_description;
      appendix.push_back({{"item_id", rec.item_id},
                          {"true_label", optional_json(rec.true_label)},
                          {"predicted_label", rec.predicted_label},
                          {"best_class_id", b.class_id},
                          {"description_index", b.description_index},
                          {"similarity", b.similarity},
                          {"text", b.text}});
    }
    run["appendix"] = std::move(appendix);
    runs.push_back(std::move(run));
  }
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_report(const std::vector<RunResult>& results,
                                               const std::vector<std::string>& formats,
                                               const std::filesystem::path& prefix) {
  const std::set<std::string> known{"json", "tsv", "txt"};
  for (const auto& f : formats)
    if (!known.count(f)) throw Error(Errc::UnknownFormat, f);

  auto with_suffix = [&](std::string_view suffix) {
    auto p = prefix;
    p += suffix;
    return p;
  };
  std::vector<std::filesystem::path> written;
  std::set<std::string> done;
  for (const auto& f : formats) {
    if (!done.insert(f).second) continue;
    if (f == "json") {
      written.push_back(with_suffix(".report.json"));
      io::write_atomic(written.back(), render_report_json(results));
    } else if (f == "tsv") {
      written.push_back(with_suffix(".summary.tsv"));
      io::write_atomic(written.back(), render_summary_tsv(results));
      written.push_back(with_suffix(".folds.tsv"));
      io::write_atomic(written.back(), render_folds_tsv(results));
    } else {
      written.push_back(with_suffix(".summary.txt"));
      io::write_atomic(written.back(), render_text_report(results));
    }
  }
  return written;
}

}  // namespace zeroleaf
