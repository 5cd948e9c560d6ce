// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_SPECTRAL_DOMAIN_HPP
#define SDWAVE_SPECTRAL_DOMAIN_HPP

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sdwave
{

// Coefficient vectors are passed around as (possibly strided) views so that the
// u/p/v/q components of an interleaved ModalState can be handed to transforms
// without copies.
using CoeffView = Eigen::Ref<const Eigen::VectorXd, 0, Eigen::InnerStride<>>;

enum class DomainKind
{
  Interval,
  Box
};

//
// Eigenbasis of the Dirichlet Laplacian A = -Delta on an interval (0, L) or a
// box (0, L1) x (0, L2) x (0, L3). Modes are ordered by eigenvalue; ties in the
// box are broken by lexicographic order of the integer index triple.
//
class EigenBasis
{
public:
  EigenBasis(DomainKind kind, std::vector<double> lengths, std::vector<std::array<int, 3>> indices);

  DomainKind kind() const { return kind_; }
  int dimension() const { return kind_ == DomainKind::Interval ? 1 : 3; }
  const std::vector<double> &lengths() const { return lengths_; }
  int size() const { return static_cast<int>(indices_.size()); }

  const Eigen::VectorXd &eigenvalues() const { return lambda_; }
  double lambda(int k) const { return lambda_[k]; }
  double lambda1() const { return lambda_[0]; }
  const std::array<int, 3> &mode_index(int k) const { return indices_[k]; }

  // L^2-orthonormal eigenfunction e_k evaluated at a point with dimension()
  // coordinates.
  double eigenfunction(int k, std::span<const double> x) const;

  // Same basis with a different number of leading modes (interval only keeps the
  // length; box re-enumerates nothing and simply truncates the sorted list).
  EigenBasis truncated(int n_modes) const;

  bool same_as(const EigenBasis &other) const;

private:
  DomainKind kind_;
  std::vector<double> lengths_;
  std::vector<std::array<int, 3>> indices_;
  Eigen::VectorXd lambda_;
};

EigenBasis build_interval_basis(int n_modes, double length);
EigenBasis build_box_basis(std::array<int, 3> modes_per_axis, std::array<double, 3> lengths);

//
// Galerkin state (u, u_t, v, v_t) in modal coordinates. Storage is a single
// vector interleaved by mode: entry 4k + c holds component c of mode k, with
// c = 0 (u), 1 (p = u_t), 2 (v), 3 (q = v_t). This is the layout of every 4N x 4N
// operator matrix in the library.
//
class ModalState
{
public:
  using Component = Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<4>>;
  using ConstComponent = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<4>>;

  ModalState() = default;
  explicit ModalState(int n_modes, double time = 0.0);
  ModalState(Eigen::VectorXd flat, double time);

  int n_modes() const { return static_cast<int>(data_.size() / 4); }
  double time = 0.0;

  Component u() { return component(0); }
  Component p() { return component(1); }
  Component v() { return component(2); }
  Component q() { return component(3); }
  ConstComponent u() const { return component(0); }
  ConstComponent p() const { return component(1); }
  ConstComponent v() const { return component(2); }
  ConstComponent q() const { return component(3); }

  Eigen::VectorXd &flat() { return data_; }
  const Eigen::VectorXd &flat() const { return data_; }

  bool all_finite() const { return data_.allFinite(); }

private:
  Component component(int c) { return Component(data_.data() + c, n_modes()); }
  ConstComponent component(int c) const { return ConstComponent(data_.data() + c, n_modes()); }

  Eigen::VectorXd data_;
};

//
// Gauss-Legendre quadrature (tensor rule on the box) together with the table of
// eigenfunction values at the nodes. On the interval the rule is built mirror
// symmetric about L/2 and the table satisfies e_k(L - x) = (-1)^(k+1) e_k(x)
// bit for bit; synthesize/analyze fold the sums, so reflection-antisymmetric
// data stays exactly in its invariant subspace.
//
class QuadratureGrid
{
public:
  // Left-half data of a mirror-symmetric interval rule, split by the parity of
  // the modes under x -> L - x (plus: odd k, minus: even k, k 1-based).
  struct Fold
  {
    int pairs = 0;            // node i pairs with node size()-1-i for i < pairs
    bool has_middle = false;  // odd node count: node `pairs` sits at L/2
    std::vector<int> plus_modes, minus_modes;
    Eigen::MatrixXd plus_table, minus_table;        // pairs x |modes|
    Eigen::MatrixXd plus_weighted, minus_weighted;  // rows scaled by the weights
    Eigen::RowVectorXd middle_plus;                 // e_k(L/2), plus modes only
    double middle_weight = 0.0;
  };

  QuadratureGrid(DomainKind kind, std::vector<double> lengths, int dealias_factor,
                 std::vector<std::array<double, 3>> nodes, Eigen::VectorXd weights,
                 Eigen::MatrixXd table, std::vector<int> mode_ids, std::optional<Fold> fold);

  int size() const { return static_cast<int>(weights_.size()); }
  int n_modes() const { return static_cast<int>(table_.cols()); }
  int dealias_factor() const { return dealias_factor_; }
  const std::vector<std::array<double, 3>> &nodes() const { return nodes_; }
  const Eigen::VectorXd &weights() const { return weights_; }
  // table()(i, k) = e_k(node_i)
  const Eigen::MatrixXd &table() const { return table_; }
  const std::optional<Fold> &fold() const { return fold_; }

  // sum_i w_i g_i
  double integrate(const Eigen::VectorXd &samples) const;

  bool built_for(const EigenBasis &basis) const;

private:
  DomainKind kind_;
  std::vector<double> lengths_;
  int dealias_factor_;
  std::vector<std::array<double, 3>> nodes_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd table_;
  std::vector<int> mode_ids_;  // flattened mode index triples, for basis matching
  std::optional<Fold> fold_;
};

// Gauss-Legendre nodes/weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double> &nodes, std::vector<double> &weights);

QuadratureGrid build_quadrature(const EigenBasis &basis, int dealias_factor = 4);

Eigen::VectorXd fractional_power_apply(const EigenBasis &basis, CoeffView coeffs, double s);
double norm_fractional(const EigenBasis &basis, CoeffView coeffs, double alpha);

double norm_Y0(const ModalState &state, const EigenBasis &basis);
double norm_Y1(const ModalState &state, const EigenBasis &basis);

// Diagonal similarity weights D with ||x||_Y = |D x|_2 for interleaved vectors.
Eigen::VectorXd weights_Y0(const EigenBasis &basis);
Eigen::VectorXd weights_Y1(const EigenBasis &basis);

// grid values of sum_k c_k e_k
Eigen::VectorXd synthesize(const EigenBasis &basis, CoeffView coeffs, const QuadratureGrid &grid);
// c_k = sum_i w_i g_i e_k(x_i)
Eigen::VectorXd analyze(const EigenBasis &basis, const Eigen::VectorXd &values, const QuadratureGrid &grid);

}  // namespace sdwave

#endif  // SDWAVE_SPECTRAL_DOMAIN_HPP
