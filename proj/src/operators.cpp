// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "sdwave/errors.hpp"
#include "sdwave/linalg.hpp"

namespace sdwave
{

namespace
{

bool offdiagonal_zero(const Eigen::MatrixXd &P)
{
  for (Eigen::Index j = 0; j < P.cols(); ++j)
  {
    for (Eigen::Index i = 0; i < P.rows(); ++i)
    {
      if (i != j && P(i, j) != 0.0)
      {
        return false;
      }
    }
  }
  return true;
}

void check_potential(const EigenBasis &basis, const std::optional<Eigen::MatrixXd> &P)
{
  if (P && (P->rows() != basis.size() || P->cols() != basis.size()))
  {
    throw InvalidArgument("potential must be N x N with N = number of modes");
  }
  if (P && !P->allFinite())
  {
    throw InvalidArgument("potential has non-finite entries");
  }
}

void check_coefficients(double eta, double a)
{
  if (!(eta > 0.0) || !std::isfinite(eta))
  {
    throw InvalidArgument("eta must be positive");
  }
  if (!(a >= 0.0) || !std::isfinite(a))
  {
    throw InvalidArgument("coupling value must be nonnegative");
  }
}

template <class Mat>
double spectral_norm_any(const Mat &M)
{
  if (M.size() == 0)
  {
    return 0.0;
  }
  if (M.cols() <= 256)
  {
    Eigen::BDCSVD<Mat> svd(M);
    return svd.singularValues()(0);
  }
  return linalg::spectral_norm_power(M);
}

// D_out M D_in^-1 norm, block by block when M is mode block diagonal.
template <class Mat>
double scaled_norm(const Mat &M, const Eigen::VectorXd &d_out, const Eigen::VectorXd &d_in, bool block_diagonal)
{
  using Scalar = typename Mat::Scalar;
  if (block_diagonal)
  {
    double best = 0.0;
    for (Eigen::Index b = 0; b < M.rows() / 4; ++b)
    {
      Eigen::Matrix<Scalar, 4, 4> blk = d_out.segment<4>(4 * b).template cast<Scalar>().asDiagonal() *
                                        M.template block<4, 4>(4 * b, 4 * b) *
                                        d_in.segment<4>(4 * b).cwiseInverse().template cast<Scalar>().asDiagonal();
      best = std::max(best, linalg::spectral_norm_svd(blk));
    }
    return best;
  }
  const Mat S = d_out.template cast<Scalar>().asDiagonal() * M *
                d_in.cwiseInverse().template cast<Scalar>().asDiagonal();
  return spectral_norm_any(S);
}

std::vector<double> default_grid(const std::vector<double> &g, double fallback)
{
  return g.empty() ? std::vector<double>{fallback} : g;
}

nlohmann::json setup_params(const OperatorSetup &setup)
{
  return {{"n_modes", setup.basis.size()}, {"eta", setup.eta}};
}

}  // namespace

ModeBlock make_mode_block(double lambda, double eta, double a_value, double potential_shift)
{
  ModeBlock b;
  b.lambda = lambda;
  b.eta = eta;
  b.a_value = a_value;
  b.potential_shift = potential_shift;
  const double s = std::sqrt(lambda);
  b.entries << 0.0, -1.0, 0.0, 0.0,                          //
      lambda + 1.0 - potential_shift, eta * s, 0.0, a_value * s,  //
      0.0, 0.0, 0.0, -1.0,                                        //
      0.0, -a_value * s, lambda, eta * s;
  return b;
}

OperatorAssembly assemble_operator(const EigenBasis &basis, double eta, double a_value,
                                   const std::optional<Eigen::MatrixXd> &potential)
{
  check_coefficients(eta, a_value);
  check_potential(basis, potential);
  const int N = basis.size();
  OperatorAssembly op{basis, eta, a_value, potential, {}, Eigen::MatrixXd::Zero(4 * N, 4 * N),
                      weights_Y0(basis), weights_Y1(basis), true};
  op.block_diagonal = !potential || offdiagonal_zero(*potential);
  op.blocks.reserve(N);
  for (int k = 0; k < N; ++k)
  {
    op.blocks.push_back(make_mode_block(basis.lambda(k), eta, a_value, potential ? (*potential)(k, k) : 0.0));
    op.matrix.block<4, 4>(4 * k, 4 * k) = op.blocks.back().entries;
  }
  if (!op.block_diagonal)
  {
    const auto &P = *potential;
    for (int j = 0; j < N; ++j)
    {
      for (int k = 0; k < N; ++k)
      {
        if (j != k)
        {
          op.matrix(4 * j + 1, 4 * k) = -P(j, k);
        }
      }
    }
  }
  return op;
}

namespace
{

// (A + I - P) with its eigen-decomposition; throws on a (numerically) zero eigenvalue.
struct EllipticPart
{
  Eigen::MatrixXd K;
  Eigen::VectorXd eig;
  Eigen::MatrixXd Kinv;
};

EllipticPart elliptic_part(const EigenBasis &basis, const std::optional<Eigen::MatrixXd> &P)
{
  const int N = basis.size();
  EllipticPart e;
  e.K = Eigen::MatrixXd::Zero(N, N);
  e.K.diagonal() = basis.eigenvalues().array() + 1.0;
  if (P)
  {
    e.K -= *P;
  }
  const bool diag = !P || offdiagonal_zero(*P);
  if (diag)
  {
    e.eig = e.K.diagonal();
  }
  else
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (e.K + e.K.transpose()));
    e.eig = es.eigenvalues();
    e.Kinv = es.eigenvectors() * e.eig.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  }
  const double big = e.eig.cwiseAbs().maxCoeff();
  const double small = e.eig.cwiseAbs().minCoeff();
  if (!(small > 1e-12 * std::max(1.0, big)))
  {
    throw HyperbolicityViolation("A + I - f'(u*) is singular (smallest |eigenvalue| " + std::to_string(small) + ")");
  }
  if (diag)
  {
    e.Kinv = e.eig.cwiseInverse().asDiagonal();
  }
  return e;
}

}  // namespace

double elliptic_inverse_norm(const EigenBasis &basis, const std::optional<Eigen::MatrixXd> &potential)
{
  check_potential(basis, potential);
  return 1.0 / elliptic_part(basis, potential).eig.cwiseAbs().minCoeff();
}

OperatorAssembly assemble_inverse(const EigenBasis &basis, double eta, double a_value,
                                  const std::optional<Eigen::MatrixXd> &potential)
{
  check_coefficients(eta, a_value);
  check_potential(basis, potential);
  const int N = basis.size();
  const EllipticPart E = elliptic_part(basis, potential);
  const Eigen::MatrixXd &Ki = E.Kinv;
  OperatorAssembly op{basis, eta, a_value, potential, {}, Eigen::MatrixXd::Zero(4 * N, 4 * N),
                      weights_Y0(basis), weights_Y1(basis), true};
  op.block_diagonal = !potential || offdiagonal_zero(*potential);
  // first row is K^-1 [eta S, I, a S, 0]: K^-1 multiplies from the left, which is
  // what makes this a two-sided inverse when K and A do not commute
  for (int j = 0; j < N; ++j)
  {
    const double sj = std::sqrt(basis.lambda(j));
    for (int k = 0; k < N; ++k)
    {
      if (Ki(j, k) == 0.0)
      {
        continue;
      }
      const double sk = std::sqrt(basis.lambda(k));
      op.matrix(4 * j, 4 * k) = Ki(j, k) * eta * sk;
      op.matrix(4 * j, 4 * k + 1) = Ki(j, k);
      op.matrix(4 * j, 4 * k + 2) = Ki(j, k) * a_value * sk;
    }
    op.matrix(4 * j + 1, 4 * j) = -1.0;
    op.matrix(4 * j + 2, 4 * j) = -a_value / sj;
    op.matrix(4 * j + 2, 4 * j + 2) = eta / sj;
    op.matrix(4 * j + 2, 4 * j + 3) = 1.0 / basis.lambda(j);
    op.matrix(4 * j + 3, 4 * j + 2) = -1.0;
  }
  op.blocks.reserve(N);
  for (int k = 0; k < N; ++k)
  {
    ModeBlock b;
    b.lambda = basis.lambda(k);
    b.eta = eta;
    b.a_value = a_value;
    b.potential_shift = potential ? (*potential)(k, k) : 0.0;
    b.entries = op.matrix.block<4, 4>(4 * k, 4 * k);
    op.blocks.push_back(b);
  }
  return op;
}

double spectral_norm(const Eigen::MatrixXd &M) { return spectral_norm_any(M); }

double operator_norm_Y0(const OperatorAssembly &op)
{
  return scaled_norm(op.matrix, op.w0, op.w0, op.block_diagonal);
}

double operator_norm_Y0_to_Y1(const OperatorAssembly &op)
{
  return scaled_norm(op.matrix, op.w1, op.w0, op.block_diagonal);
}

double operator_norm_Y0(const Eigen::MatrixXd &M, const EigenBasis &basis)
{
  if (M.rows() != 4 * basis.size() || M.cols() != 4 * basis.size())
  {
    throw InvalidArgument("operator_norm_Y0: matrix size does not match basis");
  }
  const Eigen::VectorXd w = weights_Y0(basis);
  return scaled_norm(M, w, w, linalg::is_mode_block_diagonal(M));
}

double operator_norm_Y0_to_Y1(const Eigen::MatrixXd &M, const EigenBasis &basis)
{
  if (M.rows() != 4 * basis.size() || M.cols() != 4 * basis.size())
  {
    throw InvalidArgument("operator_norm_Y0_to_Y1: matrix size does not match basis");
  }
  return scaled_norm(M, weights_Y1(basis), weights_Y0(basis), linalg::is_mode_block_diagonal(M));
}

double resolvent_norm(const OperatorAssembly &op, std::complex<double> mu)
{
  using cd = std::complex<double>;
  const auto pole = [&]() {
    return ResolventPole("resolvent pole at mu = (" + std::to_string(mu.real()) + ", " + std::to_string(mu.imag()) +
                         ")");
  };
  if (op.block_diagonal)
  {
    double best = 0.0;
    for (std::size_t b = 0; b < op.blocks.size(); ++b)
    {
      const Eigen::Matrix4cd C = op.blocks[b].entries.cast<cd>() + mu * Eigen::Matrix4cd::Identity();
      Eigen::PartialPivLU<Eigen::Matrix4cd> lu(C);
      if (!(lu.rcond() >= 1e-14))
      {
        throw pole();
      }
      const auto d = op.w0.segment<4>(4 * b);
      const Eigen::Matrix4cd R =
          d.cast<cd>().asDiagonal() * lu.inverse() * d.cwiseInverse().cast<cd>().asDiagonal();
      best = std::max(best, linalg::spectral_norm_svd(R));
    }
    return best;
  }
  const Eigen::Index n = op.matrix.rows();
  const Eigen::MatrixXcd C = op.matrix.cast<cd>() + mu * Eigen::MatrixXcd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(C);
  if (!(lu.rcond() >= 1e-14))
  {
    throw pole();
  }
  return scaled_norm(Eigen::MatrixXcd(lu.inverse()), op.w0, op.w0, false);
}

Eigen::MatrixXd matrix_semigroup(const OperatorAssembly &op, double s)
{
  if (!(s >= 0.0) || !std::isfinite(s))
  {
    throw InvalidArgument("matrix_semigroup: s must be finite and nonnegative");
  }
  const Eigen::Index n = op.matrix.rows();
  if (s == 0.0)
  {
    return Eigen::MatrixXd::Identity(n, n);
  }
  if (op.block_diagonal)
  {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t b = 0; b < op.blocks.size(); ++b)
    {
      const Eigen::Matrix4d blk = -s * op.blocks[b].entries;
      E.block<4, 4>(4 * b, 4 * b) = linalg::expm(blk);
    }
    return E;
  }
  return linalg::expm(-s * op.matrix);
}

double imaginary_axis_constant(double eta, double a1)
{
  if (!(eta > 0.0))
  {
    throw InvalidArgument("imaginary_axis_constant: eta must be positive");
  }
  return 1.0 + 2.0 * (2.0 * eta + 2.0 * (a1 * a1 + 1.0) / eta + 4.0) + (2.0 * a1 + 2.0) / eta;
}

PotentialProvider no_potential()
{
  return [](const EigenBasis &) { return PotentialData{}; };
}

PotentialProvider constant_potential(double value, double rho)
{
  return [value, rho](const EigenBasis &basis) {
    PotentialData d;
    d.matrix = Eigen::MatrixXd::Identity(basis.size(), basis.size()) * value;
    double vol = 1.0;
    for (double L : basis.lengths())
    {
      vol *= L;
    }
    d.rho = rho;
    d.fprime_lq_norm = std::abs(value) * std::pow(vol, (rho - 1.0) / (2.0 * rho));
    return d;
  };
}

OperatorAssembly assemble_perturbed(const OperatorSetup &setup, const PotentialData &pot,
                                    const CoefficientFamily &family, double eps, double t)
{
  return assemble_operator(setup.basis, setup.eta, eval_a(family, eps, t), pot.matrix);
}

double default_sector_angle(double eta, double a1)
{
  return std::numbers::pi / 2.0 + std::atan(1.0 / (4.0 * imaginary_axis_constant(eta, a1)));
}

double sector_sup(const AssemblyFactory &factory, const SectorSpec &spec, int sample_count)
{
  if (!(spec.phi0 > 0.0 && spec.phi0 < std::numbers::pi))
  {
    throw InvalidArgument("sector angle must lie in (0, pi)");
  }
  std::vector<double> angles;
  if (spec.angles.empty())
  {
    const int na = std::max(3, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(sample_count)))));
    for (int i = 0; i < na; ++i)
    {
      angles.push_back(-spec.phi0 + 2.0 * spec.phi0 * i / (na - 1));
    }
  }
  else
  {
    std::copy_if(spec.angles.begin(), spec.angles.end(), std::back_inserter(angles),
                 [&](double th) { return std::abs(th) <= spec.phi0; });
  }
  const int na = static_cast<int>(angles.size());
  const int nr = std::max(2, sample_count / std::max(1, na));
  const double r_min = std::max(spec.R0, 1e-3);
  double best = 0.0;
  for (double eps : default_grid(spec.eps_grid, 0.0))
  {
    for (double t : default_grid(spec.t_grid, 0.0))
    {
      const OperatorAssembly op = factory(eps, t);
      for (int i = 0; i < na; ++i)
      {
        const double th = angles[i];
        for (int j = 0; j < nr; ++j)
        {
          const double r = r_min * std::pow(spec.radius_span, static_cast<double>(j) / (nr - 1));
          const std::complex<double> mu = spec.vertex + std::polar(r, th);
          try
          {
            best = std::max(best, (1.0 + std::abs(mu)) * resolvent_norm(op, mu));
          }
          catch (const ResolventPole &)
          {
            return std::numeric_limits<double>::infinity();
          }
        }
      }
    }
  }
  return best;
}

Report verify_sector_estimate(const AssemblyFactory &factory, const SectorSpec &spec, int sample_count)
{
  Report rep;
  rep.name = "sector_estimate";
  const double sup = sector_sup(factory, spec, sample_count);
  const nlohmann::json par = {{"phi0", spec.phi0},          {"vertex", {spec.vertex.real(), spec.vertex.imag()}},
                              {"R0", spec.R0},              {"radius_span", spec.radius_span},
                              {"samples", sample_count},    {"t_grid", default_grid(spec.t_grid, 0.0)},
                              {"eps_grid", default_grid(spec.eps_grid, 0.0)}};
  rep.add("sector_sup", sup, spec.C_bound, std::isfinite(sup) && sup <= spec.C_bound, par);
  return rep;
}

Report verify_sector_estimate(const OperatorSetup &setup, const CoefficientFamily &family, const SectorSpec &spec,
                              int sample_count)
{
  const auto run = [&](const EigenBasis &basis) {
    OperatorSetup s = setup;
    s.basis = basis;
    const PotentialData pot = setup.potential(basis);
    return verify_sector_estimate(
        [&](double eps, double t) { return assemble_perturbed(s, pot, family, eps, t); }, spec, sample_count);
  };
  Report rep = run(setup.basis);
  rep.rows.front().parameters.update(setup_params(setup));
  if (setup.truncation_audit)
  {
    attach_truncation(rep, run(refined_basis(setup.basis)), 0.10);
  }
  return rep;
}

namespace
{

Report operator_difference_once(const CoefficientFamily &family, double eps, double t, double tau,
                                const OperatorSetup &setup, const std::vector<double> &s_samples)
{
  Report rep;
  rep.name = "operator_difference_bound";
  const PotentialData pot = setup.potential(setup.basis);
  const OperatorAssembly inv = assemble_inverse(setup.basis, setup.eta, eval_a(family, eps, tau), pot.matrix);
  const OperatorAssembly At_eps = assemble_perturbed(setup, pot, family, eps, t);
  const OperatorAssembly At_0 = assemble_perturbed(setup, pot, family, 0.0, t);
  nlohmann::json par = setup_params(setup);
  par.update({{"eps", eps}, {"t", t}, {"tau", tau}});

  const double diff = operator_norm_Y0(Eigen::MatrixXd((At_eps.matrix - At_0.matrix) * inv.matrix), setup.basis);
  const double sup = family.sup_distance(eps);
  rep.add("difference", diff, sup, diff <= sup, par);

  std::vector<double> ss = s_samples;
  if (ss.empty())
  {
    for (double h : {0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0})
    {
      ss.push_back(t + h);
    }
  }
  for (double s : ss)
  {
    const OperatorAssembly As = assemble_perturbed(setup, pot, family, eps, s);
    const double h = operator_norm_Y0(Eigen::MatrixXd((At_eps.matrix - As.matrix) * inv.matrix), setup.basis);
    const double bound = family.holder_C * std::pow(std::abs(t - s), family.holder_beta);
    nlohmann::json p = par;
    p["s"] = s;
    rep.add("holder", h, bound, h <= bound * (1.0 + 1e-12) + 1e-15, p);
  }

  const OperatorAssembly A_t = assemble_operator(setup.basis, setup.eta, eval_a(family, eps, t));
  const OperatorAssembly A_tau_inv = assemble_inverse(setup.basis, setup.eta, eval_a(family, eps, tau));
  const double prod = operator_norm_Y0(Eigen::MatrixXd(A_t.matrix * A_tau_inv.matrix), setup.basis);
  rep.add("product_bound", prod, 1.0 + 2.0 * family.a1_upper, prod <= 1.0 + 2.0 * family.a1_upper, par);
  return rep;
}

void add_halving_rows(Report &rep, const std::string &id, const std::vector<double> &eps_list,
                      const std::vector<double> &values)
{
  for (auto [i, j] : halving_pairs(eps_list))
  {
    const double ratio = values[j] > 0.0 ? values[i] / values[j] : (values[i] == 0.0 ? 2.0 : INFINITY);
    // eps-halving should halve the value: accept 1/ratio within 25% of 1/2
    const bool ok = std::abs(1.0 / ratio - 0.5) <= 0.125;
    rep.add(id, ratio, 2.0, ok, {{"eps", eps_list[i]}, {"eps_half", eps_list[j]}});
  }
}

}  // namespace

Report verify_operator_difference_bound(const CoefficientFamily &family, double eps, double t, double tau,
                                        const OperatorSetup &setup, const std::vector<double> &s_samples)
{
  Report rep = operator_difference_once(family, eps, t, tau, setup, s_samples);
  if (setup.truncation_audit)
  {
    OperatorSetup fine = setup;
    fine.basis = refined_basis(setup.basis);
    attach_truncation(rep, operator_difference_once(family, eps, t, tau, fine, s_samples));
  }
  return rep;
}

double inverse_convergence_constant(const EigenBasis &basis, const PotentialData &pot)
{
  const double kappa0 = elliptic_inverse_norm(basis, pot.matrix);
  const double l1 = std::pow(basis.lambda1(), -0.5);
  double vol = 1.0;
  for (double L : basis.lengths())
  {
    vol *= L;
  }
  // X^{1/2} -> L^{2 rho}: |w|_inf <= sqrt(L)/2 |w'|_2 on an interval, then
  // |w|_{2 rho} <= L^{1/(2 rho)} |w|_inf
  const double ctilde = std::pow(vol, 1.0 / (2.0 * pot.rho)) * std::sqrt(vol) / 2.0;
  const double kt = (1.0 + kappa0) * l1 + kappa0 * pot.fprime_lq_norm * ctilde;
  return std::max(kt, l1);
}

Report verify_inverse_convergence(const CoefficientFamily &family, const std::vector<double> &eps_list, double t,
                                  const OperatorSetup &setup)
{
  const auto once = [&](const OperatorSetup &s) {
    Report rep;
    rep.name = "inverse_convergence";
    const PotentialData pot = s.potential(s.basis);
    const double kk = inverse_convergence_constant(s.basis, pot);
    const OperatorAssembly inv0 = assemble_inverse(s.basis, s.eta, eval_a(family, 0.0, t), pot.matrix);
    std::vector<double> vals;
    for (double eps : eps_list)
    {
      const OperatorAssembly inv = assemble_inverse(s.basis, s.eta, eval_a(family, eps, t), pot.matrix);
      const double d = operator_norm_Y0(Eigen::MatrixXd(inv.matrix - inv0.matrix), s.basis);
      vals.push_back(d);
      nlohmann::json par = setup_params(s);
      par.update({{"eps", eps}, {"t", t}, {"kappa_tt", kk}});
      const double bound = kk * family.sup_distance(eps);
      rep.add("inverse_difference", d, bound, d <= bound, par);
    }
    add_halving_rows(rep, "inverse_halving_ratio", eps_list, vals);
    rep.details["kappa_tt"] = kk;
    rep.details["kappa0"] = elliptic_inverse_norm(s.basis, pot.matrix);
    const bool commuting = !pot.matrix || offdiagonal_zero(*pot.matrix);
    rep.details["potential_commutes_with_A"] = commuting;
    if (!commuting)
    {
      rep.warnings.push_back("kappa~~ recipe assumes a potential commuting with A; bound is indicative only");
    }
    return rep;
  };
  Report rep = once(setup);
  if (setup.truncation_audit)
  {
    OperatorSetup fine = setup;
    fine.basis = refined_basis(setup.basis);
    attach_truncation(rep, once(fine));
  }
  return rep;
}

DecayFit fit_semigroup_decay(const OperatorAssembly &op, double s_max, int samples)
{
  if (!(s_max > 0.0) || samples < 2)
  {
    throw InvalidArgument("fit_semigroup_decay: need s_max > 0 and at least 2 samples");
  }
  DecayFit fit;
  double abscissa = INFINITY;
  if (op.block_diagonal)
  {
    for (const auto &b : op.blocks)
    {
      Eigen::EigenSolver<Eigen::Matrix4d> es(b.entries, false);
      abscissa = std::min(abscissa, es.eigenvalues().real().minCoeff());
    }
  }
  else
  {
    Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix, false);
    abscissa = es.eigenvalues().real().minCoeff();
  }
  fit.spectral_abscissa = abscissa;
  fit.delta = 0.9 * abscissa;
  for (int i = 0; i < samples; ++i)
  {
    const double s = s_max * i / (samples - 1);
    const double n = operator_norm_Y0(matrix_semigroup(op, s), op.basis);
    fit.K = std::max(fit.K, n * std::exp(fit.delta * s));
  }
  // check on a finer, longer grid
  for (int i = 0; i <= 3 * samples; ++i)
  {
    const double s = 1.5 * s_max * i / (3 * samples);
    const double n = operator_norm_Y0(matrix_semigroup(op, s), op.basis);
    fit.worst_ratio = std::max(fit.worst_ratio, n / (fit.K * std::exp(-fit.delta * s)));
  }
  return fit;
}

Report verify_semigroup_convergence(const CoefficientFamily &family, const std::vector<double> &eps_list,
                                    const std::vector<double> &s_grid, double t, const OperatorSetup &setup)
{
  const auto once = [&](const OperatorSetup &s) {
    Report rep;
    rep.name = "semigroup_convergence";
    const PotentialData pot = s.potential(s.basis);
    const OperatorAssembly op0 = assemble_perturbed(s, pot, family, 0.0, t);
    std::vector<Eigen::MatrixXd> E0;
    for (double si : s_grid)
    {
      E0.push_back(matrix_semigroup(op0, si));
    }
    std::vector<double> v0, v1;
    double prev0 = INFINITY, prev1 = INFINITY;
    for (double eps : eps_list)
    {
      const OperatorAssembly op = assemble_perturbed(s, pot, family, eps, t);
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t i = 0; i < s_grid.size(); ++i)
      {
        const Eigen::MatrixXd D = matrix_semigroup(op, s_grid[i]) - E0[i];
        d0 = std::max(d0, operator_norm_Y0(D, s.basis));
        d1 = std::max(d1, operator_norm_Y0_to_Y1(D, s.basis));
      }
      nlohmann::json par = setup_params(s);
      par.update({{"eps", eps}, {"t", t}, {"s_grid", s_grid}});
      // bound: the value at the previous (larger) eps, i.e. decay along the list
      rep.add("semigroup_Y0", d0, prev0, d0 <= prev0 || (d0 == 0.0 && prev0 == 0.0), par);
      rep.add("semigroup_Y0_Y1", d1, prev1, d1 <= prev1 || (d1 == 0.0 && prev1 == 0.0), par);
      v0.push_back(d0);
      v1.push_back(d1);
      prev0 = d0;
      prev1 = d1;
    }
    add_halving_rows(rep, "semigroup_Y0_halving_ratio", eps_list, v0);
    add_halving_rows(rep, "semigroup_Y0_Y1_halving_ratio", eps_list, v1);

    const double s_max = s_grid.empty() ? 5.0 : std::max(5.0, 2.0 * *std::max_element(s_grid.begin(), s_grid.end()));
    const DecayFit fit = fit_semigroup_decay(assemble_operator(s.basis, s.eta, eval_a(family, 0.0, t)), s_max);
    nlohmann::json par = setup_params(s);
    par.update({{"t", t}, {"s_max", s_max}, {"K", fit.K}, {"delta", fit.delta}});
    rep.add("decay_rate", fit.delta, 0.0, fit.delta > 0.0, par);
    rep.add("decay_bound", fit.worst_ratio, 1.1, fit.worst_ratio <= 1.1, par);
    rep.details["K"] = fit.K;
    rep.details["delta"] = fit.delta;
    rep.details["spectral_abscissa"] = fit.spectral_abscissa;
    return rep;
  };
  Report rep = once(setup);
  if (setup.truncation_audit)
  {
    OperatorSetup fine = setup;
    fine.basis = refined_basis(setup.basis);
    attach_truncation(rep, once(fine));
  }
  return rep;
}

std::vector<std::pair<int, int>> halving_pairs(const std::vector<double> &eps_list)
{
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < eps_list.size(); ++i)
  {
    for (std::size_t j = 0; j < eps_list.size(); ++j)
    {
      const double e = eps_list[i];
      if (e > 0.0 && std::abs(eps_list[j] - e / 2.0) <= 1e-12 * e)
      {
        out.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return out;
}

EigenBasis refined_basis(const EigenBasis &basis)
{
  if (basis.kind() == DomainKind::Interval)
  {
    return build_interval_basis(2 * basis.size(), basis.lengths()[0]);
  }
  std::array<int, 3> m{1, 1, 1};
  for (int k = 0; k < basis.size(); ++k)
  {
    for (int a = 0; a < 3; ++a)
    {
      m[a] = std::max(m[a], basis.mode_index(k)[a]);
    }
  }
  const auto &L = basis.lengths();
  const EigenBasis big = build_box_basis({2 * m[0], 2 * m[1], 2 * m[2]}, {L[0], L[1], L[2]});
  return big.truncated(std::min(big.size(), 2 * basis.size()));
}

}  // namespace sdwave
