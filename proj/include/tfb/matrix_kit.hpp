#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <variant>

#include "tfb/rng.hpp"
#include "tfb/types.hpp"

namespace tfb {

/// Row-wise softmax with per-row max subtraction. Each output row is
/// positive and sums to 1.
template <typename Derived>
Mat row_softmax(const Eigen::MatrixBase<Derived>& A) {
  Mat S(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i) {
    const double m = A.row(i).maxCoeff();
    S.row(i) = (A.row(i).array() - m).exp();
    S.row(i) /= S.row(i).sum();
  }
  return S;
}

/// Largest singular value. Full decomposition; all uses here are small.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& W) {
  if (W.rows() == 0 || W.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(W.derived());
  return svd.singularValues()(0);
}

/// Sum of absolute entries.
template <typename Derived>
double norm_l11(const Eigen::MatrixBase<Derived>& W) {
  return W.array().abs().sum();
}

template <typename Derived>
double norm_fro(const Eigen::MatrixBase<Derived>& W) {
  return W.norm();
}

/// Scale X onto the Frobenius ball of radius M; identity inside the ball.
/// The 1e-12 slack absorbs the rescaling rounding so a second application
/// is an exact no-op.
template <typename Derived>
Mat project_frobenius_ball(const Eigen::MatrixBase<Derived>& X, double M) {
  if (!(M > 0.0)) throw InvalidParameter("project_frobenius_ball: M must be > 0");
  const double f = X.norm();
  if (f <= M * (1.0 + 1e-12)) return X.derived();
  return (M / f) * X.derived();
}

/// Replace each row r by r / max(1, |r|_2); zero rows pass through. Same
/// idempotence slack as project_frobenius_ball.
template <typename Derived>
Mat project_rows_unit_ball(const Eigen::MatrixBase<Derived>& X) {
  Mat Y = X.derived();
  for (Index i = 0; i < Y.rows(); ++i) {
    const double nrm = Y.row(i).norm();
    if (nrm > 1.0 + 1e-12) Y.row(i) /= nrm;
  }
  return Y;
}

/// Best rank-r approximation in Frobenius norm (top-r singular triplets).
template <typename Derived>
Mat rank_truncate(const Eigen::MatrixBase<Derived>& W, Index r) {
  const Index rmax = std::min(W.rows(), W.cols());
  if (r < 1 || r > rmax) throw InvalidParameter("rank_truncate: r out of range");
  if (r == rmax) return W.derived();
  Eigen::JacobiSVD<Mat> svd(W.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

// Entry distributions for sample_matrix.
struct GaussianDist {
  double sd = 1.0;
};
struct UniformBallDist {
  double radius = 1.0;  // Frobenius radius
};
struct ParetoDist {
  double beta = 3.0;
  double x_min = 1.0;
};
struct StudentTDist {
  double dof = 3.0;
};
using MatrixDist = std::variant<GaussianDist, UniformBallDist, ParetoDist, StudentTDist>;

/// i.i.d. matrix sampler; entries filled row-major, deterministic per stream.
inline Mat sample_matrix(const MatrixDist& dist, Index T, Index d, RngStream stream) {
  if (T < 1 || d < 1) throw InvalidParameter("sample_matrix: shape must be >= 1x1");
  Rng rng(stream);
  Mat X(T, d);
  if (const auto* g = std::get_if<GaussianDist>(&dist)) {
    if (!(g->sd > 0.0)) throw InvalidParameter("sample_matrix: gaussian sd must be > 0");
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = g->sd * rng.gaussian();
  } else if (const auto* u = std::get_if<UniformBallDist>(&dist)) {
    if (!(u->radius > 0.0)) throw InvalidParameter("sample_matrix: ball radius must be > 0");
    // Uniform in the Frobenius ball: gaussian direction, radius ~ B * U^(1/(T*d)).
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = rng.gaussian();
    const double nrm = X.norm();
    const double radius =
        u->radius * std::pow(rng.uniform01_open(), 1.0 / static_cast<double>(T * d));
    X *= (nrm > 0.0) ? radius / nrm : 0.0;
  } else if (const auto* p = std::get_if<ParetoDist>(&dist)) {
    if (!(p->beta > 2.0) || !(p->x_min > 0.0))
      throw InvalidParameter("sample_matrix: pareto needs beta > 2 and x_min > 0");
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = rng.pareto_signed(p->beta, p->x_min);
  } else {
    const auto& t = std::get<StudentTDist>(dist);
    if (!(t.dof > 2.0)) throw InvalidParameter("sample_matrix: student_t needs dof > 2");
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = rng.student_t(t.dof);
  }
  return X;
}

}  // namespace tfb
