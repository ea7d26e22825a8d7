#include "zeroleaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "zeroleaf/error.hpp"

namespace zeroleaf {

ConfusionMatrix::ConfusionMatrix(CountMatrix counts) : counts_(std::move(counts)) {
  if (counts_.rows() < 1 || counts_.rows() != counts_.cols())
    throw Error(Errc::DimensionMismatch, "confusion matrix must be square with C >= 1");
  if ((counts_.array() < 0).any()) throw Error(Errc::ParseError, "negative confusion count");
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) throw Error(Errc::DimensionMismatch, "confusion matrix sum");
  counts_ += other.counts_;
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  if (y_true.size() != y_pred.size())
    throw Error(Errc::LengthMismatch, std::to_string(y_true.size()) + " vs " + std::to_string(y_pred.size()));
  if (y_true.empty()) throw Error(Errc::LengthMismatch, "no items");
  if (num_classes < 1) throw Error(Errc::LabelOutOfRange, "C must be >= 1");
  CountMatrix counts = CountMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw Error(Errc::LabelOutOfRange, "item " + std::to_string(i) + ": (" + std::to_string(t) + ", " +
                                             std::to_string(p) + ") with C = " + std::to_string(num_classes));
    ++counts(t, p);
  }
  return ConfusionMatrix(std::move(counts));
}

PrfResult macro_prf(const ConfusionMatrix& m, MacroPolicy policy) {
  const int C = m.num_classes();
  PrfResult r;
  r.precision.assign(C, 0.0);
  r.recall.assign(C, 0.0);
  r.f1.assign(C, 0.0);
  for (int c = 0; c < C; ++c) {
    const auto tp = m.tp(c), fp = m.fp(c), fn = m.fn(c);
    if (tp + fp > 0) {
      r.precision[c] = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
      r.flags.push_back({c, "precision denominator zero"});
    }
    if (tp + fn > 0) {
      r.recall[c] = static_cast<double>(tp) / static_cast<double>(tp + fn);
    } else {
      r.flags.push_back({c, "recall denominator zero"});
    }
    const double pr = r.precision[c] + r.recall[c];
    if (pr > 0.0) {
      r.f1[c] = 2.0 * r.precision[c] * r.recall[c] / pr;
    } else {
      r.flags.push_back({c, "f1 denominator zero"});
    }
    if (policy == MacroPolicy::present_classes && m.support(c) == 0) {
      r.flags.push_back({c, "absent from truth, excluded from macro means"});
      continue;
    }
    r.macro_classes.push_back(c);
  }
  if (!r.macro_classes.empty()) {
    for (int c : r.macro_classes) {
      r.macro_precision += r.precision[c];
      r.macro_recall += r.recall[c];
      r.macro_f1 += r.f1[c];
    }
    const auto n = static_cast<double>(r.macro_classes.size());
    r.macro_precision /= n;
    r.macro_recall /= n;
    r.macro_f1 /= n;
  }
  return r;
}

MccResult mcc_multiclass(const ConfusionMatrix& m) {
  // Integer sums are exact; the products are formed in long double to avoid
  // overflow for large N.
  const auto& M = m.counts();
  const long double n = static_cast<long double>(m.total());
  long double trace = 0, rc = 0, rr = 0, cc = 0;
  for (int k = 0; k < m.num_classes(); ++k) {
    const auto r = static_cast<long double>(M.row(k).sum());
    const auto c = static_cast<long double>(M.col(k).sum());
    trace += static_cast<long double>(M(k, k));
    rc += r * c;
    rr += r * r;
    cc += c * c;
  }
  const long double den_pred = n * n - cc;
  const long double den_true = n * n - rr;
  if (den_pred == 0 || den_true == 0) return {0.0, DegenerateFlag{-1, "mcc denominator zero"}};
  const long double num = n * trace - rc;
  return {static_cast<double>(num / std::sqrt(den_pred * den_true)), std::nullopt};
}

MccResult mcc_one_vs_rest_macro(const ConfusionMatrix& m) {
  double sum = 0.0;
  std::optional<DegenerateFlag> flag;
  for (int c = 0; c < m.num_classes(); ++c) {
    const auto tp = static_cast<long double>(m.tp(c)), fp = static_cast<long double>(m.fp(c));
    const auto fn = static_cast<long double>(m.fn(c)), tn = static_cast<long double>(m.tn(c));
    const long double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den == 0) {
      if (!flag) flag = DegenerateFlag{c, "one-vs-rest mcc denominator zero"};
      continue;
    }
    sum += static_cast<double>((tp * tn - fp * fn) / std::sqrt(den));
  }
  return {sum / m.num_classes(), flag};
}

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> is_positive) {
  if (scores.size() != is_positive.size()) throw Error(Errc::LengthMismatch, "scores vs labels");
  const auto positives = static_cast<std::size_t>(std::count(is_positive.begin(), is_positive.end(), true));
  const auto negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0)
    throw Error(Errc::DegenerateLabels, std::to_string(positives) + " positives, " + std::to_string(negatives) +
                                            " negatives");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(Errc::NonFiniteScore, "roc input");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) (is_positive[order[i]] ? tp : fp)++;
    curve.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.size() < 2) throw Error(Errc::MalformedCurve, "fewer than two points");
  if (curve.front() != RocPoint{0.0, 0.0}) throw Error(Errc::MalformedCurve, "curve must start at (0,0)");
  if (curve.back() != RocPoint{1.0, 1.0}) throw Error(Errc::MalformedCurve, "curve must end at (1,1)");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    if (b.fpr < a.fpr || b.tpr < 0.0 || b.tpr > 1.0 || b.fpr > 1.0)
      throw Error(Errc::MalformedCurve, "point " + std::to_string(i) + " out of order or range");
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

OvrAucResult one_vs_rest_auc(const Eigen::MatrixXd& scores, std::span<const int> y_true) {
  if (static_cast<std::size_t>(scores.rows()) != y_true.size())
    throw Error(Errc::LengthMismatch, "score rows vs labels");
  const auto C = static_cast<int>(scores.cols());
  if (C < 2) throw Error(Errc::ColumnCountMismatch, "one-vs-rest needs C >= 2");

  OvrAucResult r;
  r.per_class_auc.resize(C);
  r.curves.resize(C);
  std::vector<double> column(y_true.size());
  std::unique_ptr<bool[]> positive(new bool[y_true.size()]);
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      column[i] = scores(static_cast<Eigen::Index>(i), c);
      positive[i] = y_true[i] == c;
    }
    try {
      r.curves[c] = roc_curve(column, std::span<const bool>(positive.get(), y_true.size()));
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateLabels) throw;
      r.flags.push_back({c, "auc undefined (no positives or no negatives), excluded from macro auc"});
      continue;
    }
    r.per_class_auc[c] = auc(r.curves[c]);
    sum += *r.per_class_auc[c];
    ++defined;
  }
  if (defined > 0) {
    r.macro_auc = sum / defined;
  } else {
    r.flags.push_back({-1, "macro auc undefined"});
  }
  return r;
}

MetricsReport evaluate_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                               const Eigen::MatrixXd& scores, const MetricsOptions& options) {
  const auto C = static_cast<int>(scores.cols());
  MetricsReport r;
  r.confusion = confusion_matrix(y_true, y_pred, C);
  for (int c = 0; c < C; ++c) r.support.push_back(r.confusion.support(c));

  auto prf = macro_prf(r.confusion, options.policy);
  r.precision = std::move(prf.precision);
  r.recall = std::move(prf.recall);
  r.f1 = std::move(prf.f1);
  r.macro_precision = prf.macro_precision;
  r.macro_recall = prf.macro_recall;
  r.macro_f1 = prf.macro_f1;
  r.macro_classes = std::move(prf.macro_classes);
  r.degenerate_flags = std::move(prf.flags);

  const auto mcc = mcc_multiclass(r.confusion);
  r.mcc = mcc.value;
  if (mcc.flag) r.degenerate_flags.push_back(*mcc.flag);
  if (options.one_vs_rest_mcc) {
    const auto ovr = mcc_one_vs_rest_macro(r.confusion);
    r.mcc_ovr_macro = ovr.value;
    if (ovr.flag) r.degenerate_flags.push_back(*ovr.flag);
  }

  if (C >= 2) {
    auto ovr = one_vs_rest_auc(scores, y_true);
    r.per_class_auc = std::move(ovr.per_class_auc);
    if (options.keep_curves) r.roc = std::move(ovr.curves);
    r.macro_auc = ovr.macro_auc;
    r.degenerate_flags.insert(r.degenerate_flags.end(), ovr.flags.begin(), ovr.flags.end());
  }
  return r;
}

}  // namespace zeroleaf
