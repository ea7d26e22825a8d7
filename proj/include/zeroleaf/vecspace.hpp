#pragma once

// Embedding-space numerics: storage, L2 normalization and cosine similarity.
// Values are stored at Scalar precision (float for everything read from disk)
// and every reduction accumulates in double.

#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "zeroleaf/error.hpp"

namespace zeroleaf {

/// Norms at or below this are treated as a zero vector.
inline constexpr double kZeroNormEpsilon = 1e-12;
/// A vector flagged normalized must have a norm within this of 1.
inline constexpr double kUnitNormTolerance = 1e-5;
/// Largest floating-point excess over |1| that cosine_similarity clamps away.
inline constexpr double kCosineClampSlack = 1e-6;

namespace detail {

template <typename Derived>
double squared_norm64(const Eigen::DenseBase<Derived>& x) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double v = static_cast<double>(x(k));
    acc += v * v;
  }
  return acc;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (!std::isfinite(static_cast<double>(x(i, j)))) return false;
  return true;
}

template <typename DerivedA, typename DerivedB>
double dot64(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) acc += static_cast<double>(a(k)) * static_cast<double>(b(k));
  return acc;
}

}  // namespace detail

/// Euclidean norm accumulated in double.
template <typename Derived>
double norm64(const Eigen::DenseBase<Derived>& x) {
  return std::sqrt(detail::squared_norm64(x));
}

/// Fixed-dimension embedding with a "normalized" flag that is checked, never assumed.
template <typename Scalar>
class BasicEmbeddingVector {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit BasicEmbeddingVector(Storage values, bool normalized = false)
      : values_(std::move(values)), normalized_(normalized) {
    if (values_.size() < 1) throw Error(Errc::DimensionMismatch, "embedding vector needs dim >= 1");
    if (!detail::all_finite(values_)) throw Error(Errc::NonFiniteValue, "embedding vector contains NaN/Inf");
    if (normalized_ && std::abs(norm64(values_) - 1.0) > kUnitNormTolerance)
      throw Error(Errc::NotNormalized, "vector flagged normalized has norm " + std::to_string(norm64(values_)));
  }

  BasicEmbeddingVector(std::initializer_list<Scalar> values, bool normalized = false)
      : BasicEmbeddingVector(from_list(values), normalized) {}

  Eigen::Index dim() const noexcept { return values_.size(); }
  const Storage& values() const noexcept { return values_; }
  Scalar operator[](Eigen::Index k) const { return values_(k); }
  bool normalized() const noexcept { return normalized_; }

 private:
  static Storage from_list(std::initializer_list<Scalar> values) {
    Storage s(static_cast<Eigen::Index>(values.size()));
    Eigen::Index k = 0;
    for (Scalar v : values) s(k++) = v;
    return s;
  }

  Storage values_;
  bool normalized_;
};

/// Row-major stack of same-dimension embeddings. rows may be zero, dim may not.
template <typename Scalar>
class BasicEmbeddingMatrix {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicEmbeddingMatrix() : data_(0, 1) {}

  explicit BasicEmbeddingMatrix(Storage data, bool normalized = false)
      : data_(std::move(data)), normalized_(normalized) {
    if (data_.cols() < 1) throw Error(Errc::DimensionMismatch, "embedding matrix needs dim >= 1");
    if (!detail::all_finite(data_)) throw Error(Errc::NonFiniteValue, "embedding matrix contains NaN/Inf");
    if (normalized_) {
      for (Eigen::Index i = 0; i < data_.rows(); ++i) {
        const double n = norm64(data_.row(i));
        if (std::abs(n - 1.0) > kUnitNormTolerance)
          throw Error(Errc::NotNormalized, "row " + std::to_string(i) + " has norm " + std::to_string(n));
      }
    }
  }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index dim() const noexcept { return data_.cols(); }
  bool normalized() const noexcept { return normalized_; }
  const Storage& data() const noexcept { return data_; }
  auto row(Eigen::Index i) const { return data_.row(i); }

  BasicEmbeddingVector<Scalar> vector(Eigen::Index i) const {
    return BasicEmbeddingVector<Scalar>(data_.row(i).transpose(), normalized_);
  }

 private:
  Storage data_;
  bool normalized_ = false;
};

using EmbeddingVector = BasicEmbeddingVector<float>;
using EmbeddingMatrix = BasicEmbeddingMatrix<float>;

namespace detail {

// Writes x/|x| into out. A row already unit at storage precision is copied
// unchanged so that re-normalizing a stored unit vector is a bitwise no-op.
template <typename DerivedIn, typename DerivedOut>
void normalize_into(const Eigen::DenseBase<DerivedIn>& x, Eigen::DenseBase<DerivedOut>& out) {
  using Scalar = typename DerivedOut::Scalar;
  const double n = norm64(x);
  if (!(n > kZeroNormEpsilon)) throw Error(Errc::ZeroVector, "norm " + std::to_string(n));
  const double unit_slack = 0.5 * static_cast<double>(std::numeric_limits<Scalar>::epsilon());
  if (std::abs(n - 1.0) <= unit_slack) {
    for (Eigen::Index k = 0; k < x.size(); ++k) out(k) = static_cast<Scalar>(x(k));
    return;
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) out(k) = static_cast<Scalar>(static_cast<double>(x(k)) / n);
}

}  // namespace detail

/// Unit vector in the direction of v. Throws ZeroVector when |v| <= kZeroNormEpsilon.
template <typename Scalar>
BasicEmbeddingVector<Scalar> l2_normalize(const BasicEmbeddingVector<Scalar>& v) {
  typename BasicEmbeddingVector<Scalar>::Storage out(v.dim());
  detail::normalize_into(v.values(), out);
  return BasicEmbeddingVector<Scalar>(std::move(out), true);
}

/// Row-wise l2_normalize. The first zero row aborts with ZeroVector naming its index.
template <typename Scalar>
BasicEmbeddingMatrix<Scalar> normalize_rows(const BasicEmbeddingMatrix<Scalar>& m) {
  typename BasicEmbeddingMatrix<Scalar>::Storage out(m.rows(), m.dim());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto dst = out.row(i);
    try {
      detail::normalize_into(m.row(i), dst);
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what());
    }
  }
  return BasicEmbeddingMatrix<Scalar>(std::move(out), true);
}

/// Dot product of two unit vectors, clamped to [-1, 1] when the excess is
/// pure rounding (<= kCosineClampSlack).
template <typename DerivedA, typename DerivedB>
double unit_cosine(const Eigen::DenseBase<DerivedA>& u, const Eigen::DenseBase<DerivedB>& t) {
  double r = detail::dot64(u, t);
  if (r > 1.0 && r - 1.0 <= kCosineClampSlack) r = 1.0;
  if (r < -1.0 && -1.0 - r <= kCosineClampSlack) r = -1.0;
  return r;
}

template <typename Scalar>
double cosine_similarity(const BasicEmbeddingVector<Scalar>& u, const BasicEmbeddingVector<Scalar>& t) {
  if (u.dim() != t.dim())
    throw Error(Errc::DimensionMismatch, std::to_string(u.dim()) + " vs " + std::to_string(t.dim()));
  if (!u.normalized() || !t.normalized())
    throw Error(Errc::NotNormalized, "cosine_similarity takes normalized vectors only");
  return unit_cosine(u.values(), t.values());
}

}  // namespace zeroleaf
