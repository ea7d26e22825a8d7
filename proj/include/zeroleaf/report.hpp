#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zeroleaf/harness.hpp"

namespace zeroleaf {

/// Machine-readable documents. Field order is fixed; identical inputs give
/// identical bytes.
std::string predictions_to_json(const std::vector<PredictionRecord>& records,
                                 const std::vector<std::string>& class_names);
std::vector<PredictionRecord> predictions_from_json(std::string_view text);

std::string run_result_to_json(const RunResult& result);
RunResult run_result_from_json(std::string_view text);

/// Writes the result document and, next to it, "<stem>.predictions.json".
void save_run_result(RunResult& result, const std::filesystem::path& path);
/// Loads a result document and the prediction records it points to.
RunResult load_run_result(const std::filesystem::path& path);

/// Percent with two decimals, as in "67.30".
std::string format_percent(double fraction);

/// "Group | Model | Macro Precision | Macro Recall | Macro F1-score" plus one
/// row per result, using the cross-fold means.
std::string render_summary_table(const std::vector<RunResult>& results);

/// Human-readable report: summary table, per-fold rows, confusion grids,
/// AUC, MCC, per-source breakdown and the best-description appendix.
std::string render_text_report(const std::vector<RunResult>& results);

std::string render_summary_tsv(const std::vector<RunResult>& results);
std::string render_folds_tsv(const std::vector<RunResult>& results);
std::string render_report_json(const std::vector<RunResult>& results);

/// Formats: "json" -> <prefix>.report.json, "tsv" -> <prefix>.summary.tsv and
/// <prefix>.folds.tsv, "txt" -> <prefix>.summary.txt. Returns written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<RunResult>& results,
                                               const std::vector<std::string>& formats,
                                               const std::filesystem::path& prefix);

}  // namespace zeroleaf
