#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace zeroleaf {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(CountMatrix counts);

  int num_classes() const noexcept { return static_cast<int>(counts_.rows()); }
  const CountMatrix& counts() const noexcept { return counts_; }
  std::int64_t total() const noexcept { return counts_.sum(); }

  std::int64_t tp(int c) const { return counts_(c, c); }
  std::int64_t fn(int c) const { return counts_.row(c).sum() - counts_(c, c); }
  std::int64_t fp(int c) const { return counts_.col(c).sum() - counts_(c, c); }
  std::int64_t tn(int c) const { return total() - tp(c) - fn(c) - fp(c); }
  std::int64_t support(int c) const { return counts_.row(c).sum(); }

  ConfusionMatrix transposed() const { return ConfusionMatrix(counts_.transpose()); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  CountMatrix counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);

/// A zero denominator or undefined quantity; class_id is -1 for matrix-wide flags.
struct DegenerateFlag {
  int class_id;
  std::string what;
  bool operator==(const DegenerateFlag&) const = default;
};

/// Which classes enter the unweighted macro means.
enum class MacroPolicy {
  all_classes,
  /// Skip classes with no true items (their exclusion is flagged).
  present_classes,
};

struct PrfResult {
  std::vector<double> precision, recall, f1;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::vector<int> macro_classes;
  std::vector<DegenerateFlag> flags;
};

/// Per-class precision/recall/F1 and their unweighted means. Zero denominators
/// yield 0 plus a flag.
PrfResult macro_prf(const ConfusionMatrix& m, MacroPolicy policy = MacroPolicy::all_classes);

struct MccResult {
  double value = 0.0;
  std::optional<DegenerateFlag> flag;
};

/// Multiclass Matthews correlation computed from the full matrix:
/// (N tr(M) - sum_k r_k c_k) / sqrt((N^2 - sum c_k^2)(N^2 - sum r_k^2)).
MccResult mcc_multiclass(const ConfusionMatrix& m);

/// Unweighted mean of per-class one-vs-rest binary MCC; a comparison view only.
MccResult mcc_one_vs_rest_macro(const ConfusionMatrix& m);

struct RocPoint {
  double fpr;
  double tpr;
  bool operator==(const RocPoint&) const = default;
};
using RocCurve = std::vector<RocPoint>;

/// Threshold sweep over descending unique scores, (0,0) to (1,1). Equal scores
/// move together. Throws DegenerateLabels without both positives and negatives.
RocCurve roc_curve(std::span<const double> scores, std::span<const bool> is_positive);

/// Trapezoidal area under a curve starting at (0,0) and ending at (1,1).
double auc(const RocCurve& curve);

struct OvrAucResult {
  std::vector<std::optional<double>> per_class_auc;
  std::vector<RocCurve> curves;  // empty curve for undefined classes
  double macro_auc = 0.0;
  std::vector<DegenerateFlag> flags;
};

/// Column c scored against (y_true == c) for every class; undefined classes are
/// flagged and left out of the macro mean.
OvrAucResult one_vs_rest_auc(const Eigen::MatrixXd& scores, std::span<const int> y_true);

struct MetricsOptions {
  MacroPolicy policy = MacroPolicy::all_classes;
  bool one_vs_rest_mcc = false;
  bool keep_curves = true;
};

struct MetricsReport {
  ConfusionMatrix confusion{CountMatrix::Zero(1, 1)};
  std::vector<std::int64_t> support;
  std::vector<double> precision, recall, f1;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::vector<int> macro_classes;
  double mcc = 0.0;
  std::optional<double> mcc_ovr_macro;
  std::vector<std::optional<double>> per_class_auc;
  std::vector<RocCurve> roc;
  double macro_auc = 0.0;
  std::vector<DegenerateFlag> degenerate_flags;
};

/// Everything at once for one set of labelled, scored items.
MetricsReport evaluate_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                               const Eigen::MatrixXd& scores, const MetricsOptions& options = {});

}  // namespace zeroleaf
