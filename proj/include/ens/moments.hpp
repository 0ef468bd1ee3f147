#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>

namespace ens {

/// Small expression-friendly sample-moment helpers. All accept arbitrary
/// Eigen expressions (rows, columns, differences) without materializing them.

template <typename Derived>
typename Derived::Scalar sample_mean(const Eigen::MatrixBase<Derived>& v) {
  return v.mean();
}

/// Unbiased sample variance (divides by n-1).
template <typename Derived>
typename Derived::Scalar sample_variance(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  if (n < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
  const Scalar mu = v.mean();
  return (v.array() - mu).square().sum() / static_cast<Scalar>(n - 1);
}

/// Mean squared error between two equally sized expressions.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar mean_squared_error(const Eigen::MatrixBase<DerivedA>& pred,
                                             const Eigen::MatrixBase<DerivedB>& target) {
  using Scalar = typename DerivedA::Scalar;
  if (pred.size() != target.size())
    throw std::invalid_argument("mean_squared_error: size mismatch");
  return (pred.derived().array() - target.derived().array()).square().sum() /
         static_cast<Scalar>(pred.size());
}

/// Sample Pearson correlation across the two expressions. Empty when either
/// side has zero sample variance (correlation undefined).
template <typename DerivedA, typename DerivedB>
std::optional<typename DerivedA::Scalar> pearson(const Eigen::MatrixBase<DerivedA>& a,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw std::invalid_argument("pearson: size mismatch");
  const Eigen::Index n = a.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least 2 values");
  const Scalar mu_a = a.mean();
  const Scalar mu_b = b.mean();
  auto ca = (a.derived().array() - mu_a).eval();
  auto cb = (b.derived().array() - mu_b).eval();
  const Scalar ssa = ca.square().sum();
  const Scalar ssb = cb.square().sum();
  if (ssa == Scalar(0) || ssb == Scalar(0)) return std::nullopt;
  return (ca * cb).sum() / std::sqrt(ssa * ssb);
}

}  // namespace ens
