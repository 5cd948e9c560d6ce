// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/spectral_domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "sdwave/errors.hpp"

namespace sdwave
{

namespace
{

double axis_lambda(int k, double length)
{
  const double w = k * std::numbers::pi / length;
  return w * w;
}

std::vector<int> flatten_indices(const EigenBasis &basis)
{
  std::vector<int> ids;
  ids.reserve(3 * basis.size());
  for (int k = 0; k < basis.size(); ++k)
  {
    const auto &idx = basis.mode_index(k);
    ids.insert(ids.end(), idx.begin(), idx.end());
  }
  return ids;
}

void check_length(const EigenBasis &basis, Eigen::Index n, const char *what)
{
  if (n != basis.size())
  {
    throw InvalidArgument(std::string(what) + ": coefficient length " + std::to_string(n) +
                          " does not match basis size " + std::to_string(basis.size()));
  }
}

}  // namespace

EigenBasis::EigenBasis(DomainKind kind, std::vector<double> lengths,
                       std::vector<std::array<int, 3>> indices)
  : kind_(kind), lengths_(std::move(lengths)), indices_(std::move(indices))
{
  lambda_.resize(static_cast<Eigen::Index>(indices_.size()));
  for (std::size_t m = 0; m < indices_.size(); ++m)
  {
    double lam = 0.0;
    for (int a = 0; a < dimension(); ++a)
    {
      lam += axis_lambda(indices_[m][a], lengths_[a]);
    }
    lambda_[static_cast<Eigen::Index>(m)] = lam;
  }
}

double EigenBasis::eigenfunction(int k, std::span<const double> x) const
{
  double value = 1.0;
  for (int a = 0; a < dimension(); ++a)
  {
    const double L = lengths_[a];
    value *= std::sqrt(2.0 / L) * std::sin(indices_[k][a] * std::numbers::pi * x[a] / L);
  }
  return value;
}

EigenBasis EigenBasis::truncated(int n_modes) const
{
  if (n_modes < 1 || n_modes > size())
  {
    throw InvalidArgument("truncated: mode count out of range");
  }
  return EigenBasis(kind_, lengths_, {indices_.begin(), indices_.begin() + n_modes});
}

bool EigenBasis::same_as(const EigenBasis &other) const
{
  return kind_ == other.kind_ && lengths_ == other.lengths_ && indices_ == other.indices_;
}

EigenBasis build_interval_basis(int n_modes, double length)
{
  if (n_modes < 1 || !(length > 0.0))
  {
    throw InvalidArgument("build_interval_basis: n_modes must be >= 1 and length > 0");
  }
  std::vector<std::array<int, 3>> idx(n_modes);
  for (int k = 0; k < n_modes; ++k)
  {
    idx[k] = {k + 1, 0, 0};
  }
  return EigenBasis(DomainKind::Interval, {length}, std::move(idx));
}

EigenBasis build_box_basis(std::array<int, 3> modes_per_axis, std::array<double, 3> lengths)
{
  for (int a = 0; a < 3; ++a)
  {
    if (modes_per_axis[a] < 1 || !(lengths[a] > 0.0))
    {
      throw InvalidArgument("build_box_basis: every axis needs >= 1 mode and a positive length");
    }
  }
  std::vector<std::array<int, 3>> idx;
  for (int i = 1; i <= modes_per_axis[0]; ++i)
  {
    for (int j = 1; j <= modes_per_axis[1]; ++j)
    {
      for (int k = 1; k <= modes_per_axis[2]; ++k)
      {
        idx.push_back({i, j, k});
      }
    }
  }
  auto lam = [&](const std::array<int, 3> &m) {
    return axis_lambda(m[0], lengths[0]) + axis_lambda(m[1], lengths[1]) + axis_lambda(m[2], lengths[2]);
  };
  // idx is generated in lexicographic order, so a stable sort keeps ties lexicographic
  std::stable_sort(idx.begin(), idx.end(),
                   [&](const auto &x, const auto &y) { return lam(x) < lam(y); });
  return EigenBasis(DomainKind::Box, {lengths.begin(), lengths.end()}, std::move(idx));
}

ModalState::ModalState(int n_modes, double t) : time(t), data_(Eigen::VectorXd::Zero(4 * n_modes)) {}

ModalState::ModalState(Eigen::VectorXd flat, double t) : time(t), data_(std::move(flat))
{
  if (data_.size() % 4 != 0)
  {
    throw InvalidArgument("ModalState: flat vector length must be a multiple of 4");
  }
}

QuadratureGrid::QuadratureGrid(DomainKind kind, std::vector<double> lengths, int dealias_factor,
                               std::vector<std::array<double, 3>> nodes, Eigen::VectorXd weights,
                               Eigen::MatrixXd table, std::vector<int> mode_ids,
                               std::optional<Fold> fold)
  : kind_(kind), lengths_(std::move(lengths)), dealias_factor_(dealias_factor),
    nodes_(std::move(nodes)), weights_(std::move(weights)), table_(std::move(table)),
    mode_ids_(std::move(mode_ids)), fold_(std::move(fold))
{
}

double QuadratureGrid::integrate(const Eigen::VectorXd &samples) const
{
  if (samples.size() != size())
  {
    throw InvalidArgument("integrate: sample count does not match grid");
  }
  return weights_.dot(samples);
}

bool QuadratureGrid::built_for(const EigenBasis &basis) const
{
  return kind_ == basis.kind() && lengths_ == basis.lengths() && mode_ids_ == flatten_indices(basis);
}

void gauss_legendre(int n, double a, double b, std::vector<double> &nodes, std::vector<double> &weights)
{
  if (n < 1)
  {
    throw InvalidArgument("gauss_legendre: need at least one node");
  }
  // (P_n(xi), P_n'(xi)) by the three-term recurrence
  auto legendre = [n](double xi) {
    double p0 = 1.0, p1 = xi;
    for (int k = 2; k <= n; ++k)
    {
      const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (xi * p1 - p0) / (xi * xi - 1.0)};
  };
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double half = 0.5 * (b - a);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i)
  {
    double xi = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it)
    {
      const auto [p, dp] = legendre(xi);
      const double dx = p / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-16)
      {
        break;
      }
    }
    if (2 * i + 1 == n)
    {
      xi = 0.0;
    }
    const double dp = legendre(xi).second;
    const double w = half * 2.0 / ((1.0 - xi * xi) * dp * dp);
    // mirror pair sharing one weight
    nodes[i] = a + half * (1.0 - xi);
    nodes[n - 1 - i] = b - half * (1.0 - xi);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1)
  {
    nodes[m - 1] = 0.5 * (a + b);
  }
}

QuadratureGrid build_quadrature(const EigenBasis &basis, int dealias_factor)
{
  if (dealias_factor < 1)
  {
    throw InvalidArgument("build_quadrature: dealias factor must be positive");
  }
  const int N = basis.size();
  if (basis.kind() == DomainKind::Interval)
  {
    const double L = basis.lengths()[0];
    const int n = dealias_factor * N;
    std::vector<double> x, w;
    gauss_legendre(n, 0.0, L, x, w);

    QuadratureGrid::Fold fold;
    fold.pairs = n / 2;
    fold.has_middle = (n % 2 == 1);
    for (int k = 0; k < N; ++k)
    {
      // k is 0-based: mode k+1 is symmetric about L/2 iff k+1 is odd
      (k % 2 == 0 ? fold.plus_modes : fold.minus_modes).push_back(k);
    }
    Eigen::MatrixXd half(fold.pairs, N);
    for (int i = 0; i < fold.pairs; ++i)
    {
      for (int k = 0; k < N; ++k)
      {
        const double xi = x[i];
        half(i, k) = basis.eigenfunction(k, std::span<const double>(&xi, 1));
      }
    }
    // full table with the exact mirror relation
    Eigen::MatrixXd table(n, N);
    std::vector<std::array<double, 3>> nodes(n);
    Eigen::VectorXd weights(n);
    for (int i = 0; i < n; ++i)
    {
      nodes[i] = {x[i], 0.0, 0.0};
      weights[i] = w[i];
    }
    for (int i = 0; i < fold.pairs; ++i)
    {
      for (int k = 0; k < N; ++k)
      {
        table(i, k) = half(i, k);
        table(n - 1 - i, k) = (k % 2 == 0) ? half(i, k) : -half(i, k);
      }
    }
    if (fold.has_middle)
    {
      const int mid = fold.pairs;
      fold.middle_weight = w[mid];
      fold.middle_plus.resize(static_cast<Eigen::Index>(fold.plus_modes.size()));
      for (int k = 0; k < N; ++k)
      {
        // sin((k+1) pi / 2): +-1 for even k (0-based), exactly 0 otherwise
        const double val = (k % 2 == 0) ? std::sqrt(2.0 / L) * ((k / 2) % 2 == 0 ? 1.0 : -1.0) : 0.0;
        table(mid, k) = val;
      }
      for (std::size_t j = 0; j < fold.plus_modes.size(); ++j)
      {
        fold.middle_plus[static_cast<Eigen::Index>(j)] = table(mid, fold.plus_modes[j]);
      }
    }
    auto pick = [&](const std::vector<int> &modes) {
      Eigen::MatrixXd m(fold.pairs, static_cast<Eigen::Index>(modes.size()));
      for (std::size_t j = 0; j < modes.size(); ++j)
      {
        m.col(static_cast<Eigen::Index>(j)) = half.col(modes[j]);
      }
      return m;
    };
    fold.plus_table = pick(fold.plus_modes);
    fold.minus_table = pick(fold.minus_modes);
    const Eigen::VectorXd wl = weights.head(fold.pairs);
    fold.plus_weighted = wl.asDiagonal() * fold.plus_table;
    fold.minus_weighted = wl.asDiagonal() * fold.minus_table;

    return QuadratureGrid(basis.kind(), basis.lengths(), dealias_factor, std::move(nodes), std::move(weights),
                          std::move(table), flatten_indices(basis), std::move(fold));
  }

  // box: tensor Gauss-Legendre. Sines are not polynomials, so low axis counts
  // get a fixed margin on top of dealias_factor * (max index on that axis).
  std::array<int, 3> kmax{1, 1, 1};
  for (int k = 0; k < N; ++k)
  {
    for (int a = 0; a < 3; ++a)
    {
      kmax[a] = std::max(kmax[a], basis.mode_index(k)[a]);
    }
  }
  std::array<std::vector<double>, 3> ax, aw;
  for (int a = 0; a < 3; ++a)
  {
    gauss_legendre(dealias_factor * kmax[a] + 12, 0.0, basis.lengths()[a], ax[a], aw[a]);
  }
  const int n = static_cast<int>(ax[0].size() * ax[1].size() * ax[2].size());
  std::vector<std::array<double, 3>> nodes;
  nodes.reserve(n);
  Eigen::VectorXd weights(n);
  int idx = 0;
  for (std::size_t i = 0; i < ax[0].size(); ++i)
  {
    for (std::size_t j = 0; j < ax[1].size(); ++j)
    {
      for (std::size_t k = 0; k < ax[2].size(); ++k)
      {
        nodes.push_back({ax[0][i], ax[1][j], ax[2][k]});
        weights[idx++] = aw[0][i] * aw[1][j] * aw[2][k];
      }
    }
  }
  Eigen::MatrixXd table(n, N);
  for (int i = 0; i < n; ++i)
  {
    for (int k = 0; k < N; ++k)
    {
      table(i, k) = basis.eigenfunction(k, nodes[i]);
    }
  }
  return QuadratureGrid(basis.kind(), basis.lengths(), dealias_factor, std::move(nodes), std::move(weights),
                        std::move(table), flatten_indices(basis), std::nullopt);
}

Eigen::VectorXd fractional_power_apply(const EigenBasis &basis, CoeffView coeffs, double s)
{
  check_length(basis, coeffs.size(), "fractional_power_apply");
  if (s == 0.0)
  {
    return coeffs;
  }
  return (basis.eigenvalues().array().pow(s) * coeffs.array()).matrix();
}

double norm_fractional(const EigenBasis &basis, CoeffView coeffs, double alpha)
{
  check_length(basis, coeffs.size(), "norm_fractional");
  if (alpha == 0.0)
  {
    return coeffs.norm();
  }
  return (basis.eigenvalues().array().pow(alpha) * coeffs.array()).matrix().norm();
}

Eigen::VectorXd weights_Y0(const EigenBasis &basis)
{
  const int N = basis.size();
  Eigen::VectorXd d(4 * N);
  for (int k = 0; k < N; ++k)
  {
    const double r = std::sqrt(basis.lambda(k));
    d.segment<4>(4 * k) << r, 1.0, r, 1.0;
  }
  return d;
}

Eigen::VectorXd weights_Y1(const EigenBasis &basis)
{
  const int N = basis.size();
  Eigen::VectorXd d(4 * N);
  for (int k = 0; k < N; ++k)
  {
    const double lam = basis.lambda(k), r = std::sqrt(lam);
    d.segment<4>(4 * k) << lam, r, lam, r;
  }
  return d;
}

double norm_Y0(const ModalState &state, const EigenBasis &basis)
{
  check_length(basis, state.n_modes(), "norm_Y0");
  return weights_Y0(basis).cwiseProduct(state.flat()).norm();
}

double norm_Y1(const ModalState &state, const EigenBasis &basis)
{
  check_length(basis, state.n_modes(), "norm_Y1");
  return weights_Y1(basis).cwiseProduct(state.flat()).norm();
}

Eigen::VectorXd synthesize(const EigenBasis &basis, CoeffView coeffs, const QuadratureGrid &grid)
{
  check_length(basis, coeffs.size(), "synthesize");
  if (!grid.built_for(basis))
  {
    throw InvalidArgument("synthesize: quadrature grid was built for a different basis");
  }
  const auto &fold = grid.fold();
  if (!fold)
  {
    return grid.table() * coeffs;
  }
  Eigen::VectorXd cp(static_cast<Eigen::Index>(fold->plus_modes.size()));
  Eigen::VectorXd cm(static_cast<Eigen::Index>(fold->minus_modes.size()));
  for (Eigen::Index j = 0; j < cp.size(); ++j) cp[j] = coeffs[fold->plus_modes[j]];
  for (Eigen::Index j = 0; j < cm.size(); ++j) cm[j] = coeffs[fold->minus_modes[j]];
  const Eigen::VectorXd sp = fold->plus_table * cp;
  const Eigen::VectorXd sm = fold->minus_table * cm;
  const int n = grid.size(), P = fold->pairs;
  Eigen::VectorXd out(n);
  for (int i = 0; i < P; ++i)
  {
    out[i] = sp[i] + sm[i];
    out[n - 1 - i] = sp[i] - sm[i];
  }
  if (fold->has_middle)
  {
    out[P] = fold->middle_plus.dot(cp);
  }
  return out;
}

Eigen::VectorXd analyze(const EigenBasis &basis, const Eigen::VectorXd &values, const QuadratureGrid &grid)
{
  if (!grid.built_for(basis))
  {
    throw InvalidArgument("analyze: quadrature grid was built for a different basis");
  }
  if (values.size() != grid.size())
  {
    throw InvalidArgument("analyze: sample count does not match grid");
  }
  const auto &fold = grid.fold();
  if (!fold)
  {
    return grid.table().transpose() * grid.weights().cwiseProduct(values);
  }
  const int n = grid.size(), P = fold->pairs;
  Eigen::VectorXd sum(P), diff(P);
  for (int i = 0; i < P; ++i)
  {
    sum[i] = values[i] + values[n - 1 - i];
    diff[i] = values[i] - values[n - 1 - i];
  }
  Eigen::VectorXd cp = fold->plus_weighted.transpose() * sum;
  const Eigen::VectorXd cm = fold->minus_weighted.transpose() * diff;
  if (fold->has_middle)
  {
    cp += (fold->middle_weight * values[P]) * fold->middle_plus.transpose();
  }
  Eigen::VectorXd out(basis.size());
  for (Eigen::Index j = 0; j < cp.size(); ++j) out[fold->plus_modes[j]] = cp[j];
  for (Eigen::Index j = 0; j < cm.size(); ++j) out[fold->minus_modes[j]] = cm[j];
  return out;
}

}  // namespace sdwave
