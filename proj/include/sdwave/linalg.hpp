// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_LINALG_HPP
#define SDWAVE_LINALG_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>

#include <Eigen/Dense>

#include "sdwave/errors.hpp"

namespace sdwave::linalg
{

namespace detail
{

// Pade coefficients of degree 3, 5, 7, 9, 13 and the theta_m bounds of
// Higham (2005) giving backward error below the unit roundoff.
inline constexpr std::array<double, 4> pade3{120., 60., 12., 1.};
inline constexpr std::array<double, 6> pade5{30240., 15120., 3360., 420., 30., 1.};
inline constexpr std::array<double, 8> pade7{17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
inline constexpr std::array<double, 10> pade9{17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                                              2162160.,     110880.,     3960.,       90.,        1.};
inline constexpr std::array<double, 14> pade13{64764752532480000., 32382376266240000., 7771770303897600.,
                                               1187353796428800.,  129060195264000.,   10559470521600.,
                                               670442572800.,      33522128640.,       1323241920.,
                                               40840800.,          960960.,            16380.,
                                               182.,               1.};
inline constexpr std::array<double, 5> theta{1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                             2.097847961257068e0, 5.371920351148152e0};

template <class Mat, std::size_t K>
void pade_uv(const Mat &A, const std::array<double, K> &b, Mat &U, Mat &V)
{
  const Eigen::Index n = A.rows();
  const Mat I = Mat::Identity(n, n);
  const Mat A2 = A * A;
  Mat Ueven = b[1] * I, Veven = b[0] * I;
  Mat P = I;  // A^(2j)
  for (std::size_t j = 1; 2 * j < K; ++j)
  {
    P = (P * A2).eval();
    Ueven += b[2 * j + 1] * P;
    Veven += b[2 * j] * P;
  }
  U = A * Ueven;
  V = Veven;
}

template <class Mat>
void pade13_uv(const Mat &A, Mat &U, Mat &V)
{
  const auto &b = pade13;
  const Eigen::Index n = A.rows();
  const Mat I = Mat::Identity(n, n);
  const Mat A2 = A * A, A4 = A2 * A2, A6 = A4 * A2;
  const Mat W1 = b[13] * A6 + b[11] * A4 + b[9] * A2;
  const Mat W2 = b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
  const Mat Z1 = b[12] * A6 + b[10] * A4 + b[8] * A2;
  const Mat Z2 = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  U = A * (A6 * W1 + W2);
  V = A6 * Z1 + Z2;
}

}  // namespace detail

//
// Matrix exponential by scaling and squaring with a Pade approximant whose
// degree is chosen from the 1-norm (Higham 2005). Works for dynamic and fixed
// size real matrices.
//
template <class Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived> &Ain)
{
  using Mat = typename Derived::PlainObject;
  const Mat A = Ain;
  if (!A.allFinite())
  {
    throw NumericalFailure("expm: non-finite input");
  }
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  Mat U, V;
  int squarings = 0;
  if (norm1 <= detail::theta[0])
    detail::pade_uv(A, detail::pade3, U, V);
  else if (norm1 <= detail::theta[1])
    detail::pade_uv(A, detail::pade5, U, V);
  else if (norm1 <= detail::theta[2])
    detail::pade_uv(A, detail::pade7, U, V);
  else if (norm1 <= detail::theta[3])
    detail::pade_uv(A, detail::pade9, U, V);
  else
  {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / detail::theta[4]))));
    if (squarings > 1000)
    {
      throw NumericalFailure("expm: argument norm too large");
    }
    const Mat As = A * std::ldexp(1.0, -squarings);
    detail::pade13_uv(As, U, V);
  }
  Mat R = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i)
  {
    R = (R * R).eval();
  }
  if (!R.allFinite())
  {
    throw NumericalFailure("expm: overflow");
  }
  return R;
}

//
// Largest singular value by power iteration on M^H M. The start vector is
// deterministic so that repeated runs agree to the last bit.
//
template <class Derived>
double spectral_norm_power(const Eigen::MatrixBase<Derived> &M, double tol = 1e-14, int max_iter = 50000)
{
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = M.cols();
  if (n == 0 || M.rows() == 0)
  {
    return 0.0;
  }
  if (M.cwiseAbs().maxCoeff() == 0.0)
  {
    return 0.0;
  }
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i)
  {
    x[i] = Scalar(1.0 + 0.01 * std::sin(1.0 + 7.0 * static_cast<double>(i)));
  }
  x.normalize();
  double sigma = 0.0;
  int calm = 0;
  for (int it = 0; it < max_iter; ++it)
  {
    const Vec y = M * x;
    const double s = y.norm();
    Vec z = M.adjoint() * y;
    const double zn = z.norm();
    if (zn == 0.0)
    {
      return s;
    }
    x = z / zn;
    if (std::abs(s - sigma) <= tol * s)
    {
      if (++calm >= 3)
      {
        return s;
      }
    }
    else
    {
      calm = 0;
    }
    sigma = s;
  }
  throw NoConvergence("spectral_norm_power: no convergence after max iterations");
}

// 2-norm via full SVD (oracle and small-block path).
template <class Derived>
double spectral_norm_svd(const Eigen::MatrixBase<Derived> &M)
{
  using Plain = typename Derived::PlainObject;
  if (M.size() == 0)
  {
    return 0.0;
  }
  Eigen::JacobiSVD<Plain> svd(M.eval());
  return svd.singularValues()(0);
}

// True when every entry outside the 4x4 diagonal blocks is exactly zero.
template <class Derived>
bool is_mode_block_diagonal(const Eigen::MatrixBase<Derived> &M)
{
  const Eigen::Index n = M.rows();
  if (n != M.cols() || n % 4 != 0)
  {
    return false;
  }
  for (Eigen::Index j = 0; j < n; ++j)
  {
    const Eigen::Index b = j / 4;
    for (Eigen::Index i = 0; i < n; ++i)
    {
      if (i / 4 != b && M(i, j) != typename Derived::Scalar(0))
      {
        return false;
      }
    }
  }
  return true;
}

//
// || diag(d_out) M diag(d_in)^-1 ||_2, the operator norm of M between the
// weighted spaces. Mode-block-diagonal matrices are handled block by block.
//
template <class Derived>
double weighted_norm(const Eigen::MatrixBase<Derived> &M, const Eigen::VectorXd &d_out,
                     const Eigen::VectorXd &d_in)
{
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (M.rows() != d_out.size() || M.cols() != d_in.size())
  {
    throw InvalidArgument("weighted_norm: weight length mismatch");
  }
  if (is_mode_block_diagonal(M))
  {
    double best = 0.0;
    for (Eigen::Index b = 0; b < M.rows() / 4; ++b)
    {
      Eigen::Matrix<Scalar, 4, 4> blk = M.template block<4, 4>(4 * b, 4 * b);
      blk = d_out.segment<4>(4 * b).template cast<Scalar>().asDiagonal() * blk *
            d_in.segment<4>(4 * b).cwiseInverse().template cast<Scalar>().asDiagonal();
      best = std::max(best, spectral_norm_svd(blk));
    }
    return best;
  }
  const Mat S = d_out.template cast<Scalar>().asDiagonal() * M *
                d_in.cwiseInverse().template cast<Scalar>().asDiagonal();
  return spectral_norm_power(S);
}

// Eigendecomposition exponential exp(s M), returned only when the eigenvector
// matrix has 2-norm condition number below max_cond.
std::optional<Eigen::MatrixXd> expm_eigen_crosscheck(const Eigen::MatrixXd &M, double s, double max_cond = 1e6);

}  // namespace sdwave::linalg

#endif  // SDWAVE_LINALG_HPP
