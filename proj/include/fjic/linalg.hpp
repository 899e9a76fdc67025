#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "fjic/errors.hpp"

namespace fjic {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Relative pivot threshold below which a factorization is treated as singular.
inline constexpr double kPivotTolerance = 1e-12;

/// Induced infinity norm (max absolute row sum).
inline double matrix_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline void require_shape(const Mat& a, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (a.rows() != rows || a.cols() != cols) {
    raise(ErrorKind::Dimension, name + " is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

inline void require_size(const Vec& v, Eigen::Index n, const std::string& name) {
  if (v.size() != n) {
    raise(ErrorKind::Dimension,
          name + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
}

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline bool is_symmetric(const Mat& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(matrix_norm(a), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

enum class Definiteness { PositiveDefinite, PositiveSemidefinite, Indefinite };

/// Classifies a symmetric matrix from the pivots of a pivoted LDLT factorization.
/// Pivots within kPivotTolerance * ||a|| of zero count as zero.
inline Definiteness classify_symmetric(const Mat& a) {
  if (a.rows() == 0) return Definiteness::PositiveDefinite;
  const double tol = kPivotTolerance * matrix_norm(a);
  Eigen::LDLT<Mat> ldlt(0.5 * (a + a.transpose()));
  if (ldlt.info() != Eigen::Success) return Definiteness::Indefinite;
  const Vec d = ldlt.vectorD();
  if (d.minCoeff() > tol) return Definiteness::PositiveDefinite;
  if (d.minCoeff() >= -tol) return Definiteness::PositiveSemidefinite;
  return Definiteness::Indefinite;
}

inline void require_spd(const Mat& a, const std::string& name, ErrorKind kind = ErrorKind::Validation) {
  if (!is_symmetric(a, 1e-9)) raise(kind, name + " is not symmetric");
  if (!a.allFinite() || classify_symmetric(a) != Definiteness::PositiveDefinite) {
    raise(kind, name + " is not positive definite");
  }
}

inline void require_spsd(const Mat& a, const std::string& name, ErrorKind kind = ErrorKind::Validation) {
  if (!is_symmetric(a, 1e-9)) raise(kind, name + " is not symmetric");
  if (!a.allFinite() || classify_symmetric(a) == Definiteness::Indefinite) {
    raise(kind, name + " is not positive semidefinite");
  }
}

/// LU factorization with partial pivoting that refuses near-singular input.
inline Eigen::PartialPivLU<Mat> checked_lu(const Mat& a, const std::string& name, ErrorKind kind) {
  if (a.rows() != a.cols()) raise(ErrorKind::Dimension, name + " is not square");
  Eigen::PartialPivLU<Mat> lu(a);
  const double scale = matrix_norm(a);
  const double min_pivot = a.rows() == 0 ? 1.0 : lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(scale > 0.0) || !(min_pivot >= kPivotTolerance * scale)) {
    raise(kind, name + " is singular (pivot " + std::to_string(min_pivot) + ")");
  }
  return lu;
}

inline Mat checked_inverse(const Mat& a, const std::string& name, ErrorKind kind) {
  return checked_lu(a, name, kind).inverse();
}

inline Vec checked_solve(const Mat& a, const Vec& b, const std::string& name, ErrorKind kind) {
  return checked_lu(a, name, kind).solve(b);
}

inline double relative_difference(const Mat& a, const Mat& b) {
  const double scale = std::max({matrix_norm(a), matrix_norm(b), 1e-300});
  return matrix_norm(a - b) / scale;
}

}  // namespace fjic
