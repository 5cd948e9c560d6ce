// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/linalg.hpp"

namespace sdwave::linalg
{

std::optional<Eigen::MatrixXd> expm_eigen_crosscheck(const Eigen::MatrixXd &M, double s, double max_cond)
{
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success)
  {
    return std::nullopt;
  }
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto &sv = svd.singularValues();
  if (sv(sv.size() - 1) == 0.0 || sv(0) / sv(sv.size() - 1) >= max_cond)
  {
    return std::nullopt;
  }
  const Eigen::VectorXcd ex = (s * es.eigenvalues()).array().exp();
  const Eigen::MatrixXcd E = V * ex.asDiagonal() * V.inverse();
  return E.real();
}

}  // namespace sdwave::linalg
