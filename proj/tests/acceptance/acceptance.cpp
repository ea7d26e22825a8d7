// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include "golden.hpp"
#include "oracles.hpp"
#include "testutil.hpp"
#include "zeroleaf/exchange.hpp"
#include "zeroleaf/harness.hpp"
#include "zeroleaf/metrics.hpp"
#include "zeroleaf/report.hpp"
#include "zeroleaf/zeroshot.hpp"

using namespace zeroleaf;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects violations; the first few are kept for the report line.
class Verdict {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) detail_ += (detail_.empty() ? "" : "; ") + what;
  }
  int failures() const { return failures_; }
  const std::string& detail() const { return detail_; }

 private:
  int failures_ = 0;
  std::string detail_;
};

std::string num(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

std::vector<std::vector<oracle::Vec>> oracle_prompts(const TextEmbeddingBank& bank) {
  std::vector<std::vector<oracle::Vec>> out;
  for (const auto& k : bank.classes()) {
    out.emplace_back();
    for (Eigen::Index j = 0; j < k.embeddings.rows(); ++j) {
      oracle::Vec v;
      for (Eigen::Index d = 0; d < bank.dim(); ++d) v.push_back(k.embeddings.row(j)(d));
      out.back().push_back(v);
    }
  }
  return out;
}

oracle::Vec row_vec(const EmbeddingMatrix& m, Eigen::Index i) {
  oracle::Vec v;
  for (Eigen::Index d = 0; d < m.dim(); ++d) v.push_back(m.row(i)(d));
  return v;
}

std::vector<int> random_labels(testutil::Rng& rng, int n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = testutil::uniform_int(rng, 0, classes - 1);
  return y;
}

/// Scores on a coarse grid so that ties are common.
Eigen::MatrixXd grid_scores(testutil::Rng& rng, int n, int classes) {
  Eigen::MatrixXd s(n, classes);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < classes; ++c) s(i, c) = testutil::uniform_int(rng, -4, 4) * 0.25;
  return s;
}

void worked_example(Verdict& v) {
  ScoreVector s;
  s.class_scores = Eigen::Vector3d(0.35, 0.89, 0.12);
  const auto t0 = Clock::now();
  const auto p = predict(s, testutil::potato_classes());
  const auto us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
  v.expect(p.class_id == 1 && p.class_name == "Potato Late Blight", "predicted " + p.class_name);
  v.expect(!p.tie, "reported a tie");
  v.expect(us < 1000.0, "took " + num(us) + " us");
}

void algorithm_oracle(Verdict& v) {
  testutil::Rng rng(1001);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = testutil::uniform_int(rng, 2, 64), classes = testutil::uniform_int(rng, 2, 10);
    std::vector<int> per(static_cast<std::size_t>(classes));
    for (auto& n : per) n = testutil::uniform_int(rng, 1, 8);
    const auto raw = testutil::random_raw_bank(rng, classes, per, dim);
    const auto bank = testutil::build(raw);

    // the bank's stored rows are the double-precision unit vectors, rounded once
    const auto prompts = oracle_prompts(bank);
    Eigen::Index r = 0;
    for (std::size_t c = 0; c < prompts.size(); ++c)
      for (const auto& t : prompts[c]) {
        oracle::Vec raw_row;
        for (Eigen::Index d = 0; d < dim; ++d) raw_row.push_back(raw.rows(r, d));
        const auto unit = oracle::normalize(raw_row);
        for (std::size_t d = 0; d < unit.size(); ++d)
          v.expect(close(t[d], unit[d], 1e-6), "prompt row " + std::to_string(r) + " not the unit vector");
        ++r;
      }

    const int n = testutil::uniform_int(rng, 1, 12);
    ImageBatch batch{normalize_rows(EmbeddingMatrix(testutil::gaussian_rows(rng, n, dim))), {}, {}};
    for (int i = 0; i < n; ++i) batch.item_ids.push_back("i" + std::to_string(i));
    const auto records = classify_batch(batch, bank, {Aggregation::sum, 0.0, 2});
    for (int i = 0; i < n; ++i) {
      const auto expect = oracle::class_scores(row_vec(batch.embeddings, i), prompts);
      const auto& got = records[static_cast<std::size_t>(i)];
      v.expect(got.predicted_label == oracle::argmax(expect), "trial " + std::to_string(trial) + " argmax differs");
      for (int c = 0; c < classes; ++c)
        v.expect(close(got.scores.class_scores(c), expect[static_cast<std::size_t>(c)]),
                 "trial " + std::to_string(trial) + " S_c off by " +
                     num(got.scores.class_scores(c) - expect[static_cast<std::size_t>(c)]));
      const auto best = oracle::best_pair(row_vec(batch.embeddings, i), prompts);
      v.expect(got.best_description && got.best_description->class_id == best.c &&
                   got.best_description->description_index == static_cast<std::size_t>(best.j),
               "best description differs");
    }
  }
}

void metrics_oracle(Verdict& v) {
  testutil::Rng rng(2002);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = testutil::uniform_int(rng, 2, 5), n = testutil::uniform_int(rng, 1, 50);
    const auto y_true = random_labels(rng, n, classes);
    const auto y_pred = random_labels(rng, n, classes);
    const auto scores = grid_scores(rng, n, classes);
    const auto m = confusion_matrix(y_true, y_pred, classes);
    const auto tag = "trial " + std::to_string(trial) + ": ";

    const auto got = macro_prf(m);
    const auto want = oracle::prf(y_true, y_pred, classes);
    for (int c = 0; c < classes; ++c) {
      const auto k = static_cast<std::size_t>(c);
      v.expect(close(got.precision[k], want.p[k]) && close(got.recall[k], want.r[k]) && close(got.f1[k], want.f1[k]),
               tag + "per-class P/R/F1");
    }
    v.expect(close(got.macro_precision, want.mp) && close(got.macro_recall, want.mr) && close(got.macro_f1, want.mf1),
             tag + "macro P/R/F1");

    const double mcc = mcc_multiclass(m).value;
    v.expect(close(mcc, mcc_multiclass(m.transposed()).value), tag + "MCC not transposition symmetric");
    v.expect(close(mcc, oracle::correlation_mcc(y_true, y_pred, classes)), tag + "MCC vs correlation");
    if (classes == 2) {
      const auto k = oracle::counts_for(y_true, y_pred, 1);
      const double tn = n - k.tp - k.fp - k.fn;
      v.expect(close(mcc, oracle::binary_mcc(k.tp, k.fn, k.fp, tn)), tag + "MCC vs binary formula");
    }

    const auto ovr = one_vs_rest_auc(scores, y_true);
    for (int c = 0; c < classes; ++c) {
      std::vector<bool> pos;
      oracle::Vec col;
      for (int i = 0; i < n; ++i) {
        pos.push_back(y_true[static_cast<std::size_t>(i)] == c);
        col.push_back(scores(i, c));
      }
      const auto npos = std::count(pos.begin(), pos.end(), true);
      const auto& a = ovr.per_class_auc[static_cast<std::size_t>(c)];
      if (npos == 0 || npos == n) {
        v.expect(!a.has_value(), tag + "AUC should be undefined");
        continue;
      }
      v.expect(a.has_value() && close(*a, oracle::pair_auc(col, pos)), tag + "AUC vs pair count");
    }
  }
}

void invariance(Verdict& v) {
  testutil::Rng rng(3003);
  const int trials = 200;

  for (int t = 0; t < trials; ++t) {
    const int dim = testutil::uniform_int(rng, 2, 32), classes = testutil::uniform_int(rng, 2, 6);
    std::vector<int> per(static_cast<std::size_t>(classes));
    for (auto& n : per) n = testutil::uniform_int(rng, 1, 6);
    auto raw = testutil::random_raw_bank(rng, classes, per, dim);
    const auto bank = testutil::build(raw);
    const EmbeddingVector image(testutil::gaussian_rows(rng, 1, dim).row(0).transpose());

    // scale
    const double lambda = std::exp(testutil::uniform_real(rng, -6.0, 6.0));
    const EmbeddingVector scaled((image.values().cast<double>() * lambda).cast<float>().eval());
    const auto base = classify_one("x", l2_normalize(image), bank);
    v.expect(classify_one("x", l2_normalize(scaled), bank).predicted_label == base.predicted_label,
             "scale by " + num(lambda) + " changed the prediction");

    // prompt permutation within every class
    auto permuted = raw;
    Eigen::Index start = 0;
    for (auto& set : permuted.sets) {
      const auto nc = static_cast<Eigen::Index>(set.descriptions.size());
      std::vector<Eigen::Index> order(static_cast<std::size_t>(nc));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const auto& original = raw.sets[static_cast<std::size_t>(set.class_id)].descriptions;
      for (std::size_t j = 0; j < order.size(); ++j) {
        permuted.rows.row(start + static_cast<Eigen::Index>(j)) = raw.rows.row(start + order[j]);
        set.descriptions[j] = original[static_cast<std::size_t>(order[j])];
      }
      start += nc;
    }
    const auto shuffled = classify_one("x", l2_normalize(image), testutil::build(permuted));
    v.expect(shuffled.predicted_label == base.predicted_label, "prompt permutation changed the prediction");
    v.expect((shuffled.scores.class_scores - base.scores.class_scores).cwiseAbs().maxCoeff() <= 1e-12,
             "prompt permutation moved S_c");
    v.expect(shuffled.best_description->text == base.best_description->text,
             "prompt permutation changed the best description");

    // sum and mean agree when every class has the same number of prompts
    const int n_c = testutil::uniform_int(rng, 1, 6);
    const auto equal = testutil::build(
        testutil::random_raw_bank(rng, classes, std::vector<int>(static_cast<std::size_t>(classes), n_c), dim));
    const auto u = l2_normalize(image);
    v.expect(classify_one("x", u, equal, {Aggregation::sum}).predicted_label ==
                 classify_one("x", u, equal, {Aggregation::mean}).predicted_label,
             "sum and mean disagree at equal N_c");
  }

  for (int t = 0; t < trials; ++t) {
    const int n = testutil::uniform_int(rng, 2, 60);
    std::vector<double> s(static_cast<std::size_t>(n));
    for (auto& x : s) x = testutil::uniform_int(rng, -5, 5) * 0.1;
    std::vector<char> pos(static_cast<std::size_t>(n));
    for (auto& p : pos) p = testutil::uniform_int(rng, 0, 1);
    pos[0] = 1;
    pos[1] = 0;
    std::vector<char> neg(pos.size());
    std::transform(pos.begin(), pos.end(), neg.begin(), [](char p) { return static_cast<char>(!p); });
    const auto as_bools = [](const std::vector<char>& c) {
      auto b = std::make_unique<bool[]>(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) b[i] = c[i] != 0;
      return b;
    };
    const auto bp = as_bools(pos), bn = as_bools(neg);
    const double a = auc(roc_curve(s, std::span<const bool>(bp.get(), pos.size())));
    const double b = auc(roc_curve(s, std::span<const bool>(bn.get(), neg.size())));
    v.expect(close(a + b, 1.0), "AUC(y) + AUC(!y) = " + num(a + b));
  }

  for (int t = 0; t < trials; ++t) {
    const int classes = testutil::uniform_int(rng, 2, 5), n = testutil::uniform_int(rng, 2, 80);
    const auto y_true = random_labels(rng, n, classes), y_pred = random_labels(rng, n, classes);
    const auto scores = grid_scores(rng, n, classes);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t2, p2;
    Eigen::MatrixXd s2(n, classes);
    for (int i = 0; i < n; ++i) {
      const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
      t2.push_back(y_true[src]);
      p2.push_back(y_pred[src]);
      s2.row(i) = scores.row(static_cast<Eigen::Index>(src));
    }
    const auto a = evaluate_metrics(y_true, y_pred, scores), b = evaluate_metrics(t2, p2, s2);
    bool same = a.confusion.counts() == b.confusion.counts() && close(a.macro_precision, b.macro_precision) &&
                close(a.macro_recall, b.macro_recall) && close(a.macro_f1, b.macro_f1) && close(a.mcc, b.mcc) &&
                close(a.macro_auc, b.macro_auc);
    for (int c = 0; c < classes; ++c) {
      const auto& x = a.per_class_auc[static_cast<std::size_t>(c)];
      const auto& y = b.per_class_auc[static_cast<std::size_t>(c)];
      same = same && x.has_value() == y.has_value() && (!x || close(*x, *y));
    }
    v.expect(same, "joint shuffle changed the metrics");
  }
}

/// Three orthonormal centroids, 6 prompts each, 100 images per class.
double synthetic_f1(double image_sigma, std::uint64_t seed) {
  constexpr int dim = 64, classes = 3, prompts = 6, per_class = 100;
  testutil::Rng rng(seed);
  Eigen::MatrixXd basis = testutil::gaussian_rows(rng, classes, dim).cast<double>();
  for (int c = 0; c < classes; ++c) {
    for (int p = 0; p < c; ++p) basis.row(c) -= basis.row(c).dot(basis.row(p)) * basis.row(p);
    basis.row(c).normalize();
  }
  for (int a = 0; a < classes; ++a)
    for (int b = a + 1; b < classes; ++b)
      if (std::abs(basis.row(a).dot(basis.row(b))) >= 0.1) throw std::runtime_error("centroids not separated");

  testutil::RawBank raw = testutil::random_raw_bank(rng, classes, {prompts, prompts, prompts}, dim);
  const auto prompt_noise = testutil::gaussian_rows(rng, classes * prompts, dim, 0.05);
  for (int r = 0; r < classes * prompts; ++r)
    raw.rows.row(r) = basis.row(r / prompts).cast<float>() + prompt_noise.row(r);
  const auto bank = testutil::build(raw);

  auto manifest = testutil::count_manifest({"a", "b", "c"}, {"synthetic"}, {{per_class, per_class, per_class}});
  auto images = testutil::gaussian_rows(rng, static_cast<Eigen::Index>(manifest.size()), dim, image_sigma);
  for (std::size_t i = 0; i < manifest.size(); ++i)
    images.row(static_cast<Eigen::Index>(i)) += basis.row(manifest.entries[i].true_label).cast<float>();
  const auto result =
      run_evaluation(manifest, ZeroShotSource{&bank, EmbeddingMatrix(images)}, std::nullopt, {"synthetic"});
  return result.overall.macro_f1;
}

void synthetic_end_to_end(Verdict& v) {
  const double clean = synthetic_f1(0.05, 4004);
  v.expect(clean >= 0.99, "sigma 0.05 macro F1 " + num(clean));
  const double noisy = synthetic_f1(20.0, 4005);
  v.expect(noisy >= 0.15 && noisy <= 0.50, "sigma 20 macro F1 " + num(noisy));
}

void fold_plan(Verdict& v) {
  auto m = testutil::field_test_manifest();
  testutil::shuffle_entries(m, 5005);
  const auto t = tally(m);
  v.expect(t.overall == std::vector<std::int64_t>{203, 480, 262}, "class counts are not 203/480/262");

  const auto plan = stratified_kfold(m, 5, 42);
  std::vector<int> seen(m.size(), 0);
  for (int f = 0; f < 5; ++f) {
    std::vector<int> per_class(3, 0);
    for (auto i : plan.members(f)) {
      ++seen[i];
      ++per_class[static_cast<std::size_t>(m.entries[i].true_label)];
    }
    for (int c = 0; c < 3; ++c) {
      const double ideal = static_cast<double>(t.overall[static_cast<std::size_t>(c)]) / 5.0;
      v.expect(std::abs(per_class[static_cast<std::size_t>(c)] - ideal) <= 1.0,
               "fold " + std::to_string(f) + " class " + std::to_string(c) + " has " +
                   std::to_string(per_class[static_cast<std::size_t>(c)]));
    }
  }
  v.expect(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }), "folds not disjoint and covering");

  const auto again = stratified_kfold(m, 5, 42);
  v.expect(again.folds == plan.folds && format_fold_plan(again) == format_fold_plan(plan), "plan not deterministic");

  testutil::Rng rng(5006);
  const auto scores = grid_scores(rng, static_cast<int>(m.size()), 3);
  const auto r = run_evaluation(m, ExternalSource{scores}, plan, {"kfold"});
  v.expect(r.folds.size() == 5, "expected 5 fold reports");
  double p = 0, rc = 0, f1 = 0, mcc = 0, auc_sum = 0;
  for (const auto& f : r.folds) {
    p += f.macro_precision;
    rc += f.macro_recall;
    f1 += f.macro_f1;
    mcc += f.mcc;
    auc_sum += f.macro_auc;
  }
  v.expect(close(r.fold_mean.macro_precision, p / 5) && close(r.fold_mean.macro_recall, rc / 5) &&
               close(r.fold_mean.macro_f1, f1 / 5) && close(r.fold_mean.mcc, mcc / 5) &&
               close(r.fold_mean.macro_auc, auc_sum / 5),
           "cross-fold mean differs from the arithmetic mean");
}

void per_source(Verdict& v) {
  auto m = testutil::field_test_manifest();
  testutil::shuffle_entries(m, 6006);
  const auto t = tally(m);
  std::vector<std::int64_t> totals;
  for (const auto* name : {"Farmy", "Africa", "Peru", "Internet"}) {
    const auto it = std::find(t.sources.begin(), t.sources.end(), name);
    v.expect(it != t.sources.end(), std::string("missing source ") + name);
    if (it != t.sources.end()) totals.push_back(t.source_total(static_cast<std::size_t>(it - t.sources.begin())));
  }
  v.expect(totals == std::vector<std::int64_t>{224, 94, 346, 281}, "per-source totals");
  v.expect(t.total == 945, "grand total " + std::to_string(t.total));

  testutil::Rng rng(6007);
  const auto scores = grid_scores(rng, static_cast<int>(m.size()), 3);
  const auto r = run_evaluation(m, ExternalSource{scores}, stratified_kfold(m, 5, 42), {"sources"});
  CountMatrix sum = CountMatrix::Zero(3, 3);
  std::int64_t items = 0;
  for (const auto& s : r.per_source) {
    sum += s.metrics.confusion.counts();
    items += s.metrics.confusion.total();
  }
  v.expect(r.per_source.size() == 4, "expected 4 sources");
  v.expect(sum == r.overall.confusion.counts(), "per-source matrices do not sum to the overall matrix");
  v.expect(items == 945 && r.overall.confusion.total() == 945, "confusion totals");
}

void exchange(Verdict& v) {
  testutil::TempDir dir("zeroleaf-acceptance");
  testutil::Rng rng(7007);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = testutil::uniform_int(rng, 0, 16), dim = testutil::uniform_int(rng, 1, 256);
    const auto data = testutil::gaussian_rows(rng, rows, dim, 2.0);
    const EmbeddingMatrix m = trial % 2 ? normalize_rows(EmbeddingMatrix(data)) : EmbeddingMatrix(data);
    Sidecar s;
    for (int i = 0; i < rows; ++i) s.image_rows.push_back({"r" + std::to_string(i), "src", i % 3});
    const auto path = dir / ("t" + std::to_string(trial) + ".zseb");
    write_embedding_file(m, s, path);
    const auto f = read_embedding_file(path);
    const auto bytes = sizeof(float) * static_cast<std::size_t>(rows * dim);
    v.expect(f.matrix.rows() == rows && f.matrix.dim() == dim &&
                 std::memcmp(f.matrix.data().data(), m.data().data(), bytes) == 0,
             "trial " + std::to_string(trial) + " payload differs");
    v.expect(f.matrix.normalized() == m.normalized() && f.sidecar.image_rows == s.image_rows,
             "trial " + std::to_string(trial) + " metadata differs");
    const auto again = dir / ("u" + std::to_string(trial) + ".zseb");
    write_embedding_file(f.matrix, f.sidecar, again);
    v.expect(testutil::slurp(again) == testutil::slurp(path), "rewrite not byte identical");
  }

  v.expect(testutil::slurp(golden::kPath) == golden::bytes(), "golden file bytes changed");
  v.expect(encode_zseb(golden::matrix()) == golden::bytes(), "encoder output differs from golden bytes");
  v.expect(read_embedding_file(golden::kPath, {true}).matrix.data() == golden::matrix().data(),
           "golden file decodes differently");

  const auto side = testutil::slurp(sidecar_path(golden::kPath));
  const auto code_for = [&](const std::string& name, const std::string& bytes) -> std::string {
    testutil::spit(dir / name, bytes);
    testutil::spit(sidecar_path(dir / name), side);
    try {
      read_embedding_file(dir / name);
    } catch (const Error& e) {
      return std::string(to_string(e.code()));
    }
    return "no error";
  };
  auto magic = golden::bytes();
  magic[0] = 'X';
  auto flipped = golden::bytes();
  flipped[30] ^= 0x04;
  const auto expect_code = [&](const std::string& got, const std::string& want) {
    v.expect(got == want, "expected " + want + ", got " + got);
  };
  expect_code(code_for("magic.zseb", magic), "BadMagic");
  expect_code(code_for("short.zseb", golden::bytes().substr(0, golden::bytes().size() - 1)), "TruncatedPayload");
  expect_code(code_for("header.zseb", golden::bytes().substr(0, 10)), "TruncatedPayload");
  expect_code(code_for("digest.zseb", flipped), "DigestMismatch");
}

void report_fidelity(Verdict& v) {
  RunResult r;
  r.run_id = "clip-b16";
  r.model = "CLIP-ViT-B-16";
  r.group = "Multimodal CLIP Models";
  r.class_names = testutil::potato_classes();
  r.fold_mean.macro_precision = 0.6730;
  r.fold_mean.macro_recall = 0.6621;
  r.fold_mean.macro_f1 = 0.6629;
  const auto table = render_summary_table({r});
  v.expect(table.rfind("Group | Model | Macro Precision | Macro Recall | Macro F1-score\n", 0) == 0,
           "header row differs");
  v.expect(table.find("| CLIP-ViT-B-16 | 67.30 | 66.21 | 66.29\n") != std::string::npos, "summary row missing");
}

struct Criterion {
  const char* name;
  std::function<void(Verdict&)> run;
  double budget_ms;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"worked example", worked_example, 1000},
      {"classification oracle equivalence", algorithm_oracle, 5000},
      {"metrics oracle suite", metrics_oracle, 30000},
      {"invariance suite", invariance, 30000},
      {"synthetic end-to-end", synthetic_end_to_end, 10000},
      {"fold-plan properties", fold_plan, 30000},
      {"per-source consistency", per_source, 30000},
      {"exchange format", exchange, 30000},
      {"report fidelity", report_fidelity, 1000},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    v.expect(ms <= c.budget_ms, "over time budget");
    const bool ok = v.failures() == 0;
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << c.name << "  (" << std::fixed << std::setprecision(1) << ms
              << " ms)";
    if (!ok) std::cout << "  " << v.failures() << " violation(s): " << v.detail();
    std::cout << '\n';
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
