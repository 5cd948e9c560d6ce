// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_ERRORS_HPP
#define SDWAVE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sdwave
{

// Every failure raised by the library derives from Error. The CLI maps the
// subclasses onto distinct exit codes (see tools/sdwave_cli.cpp).
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

// A standing hypothesis on a_eps or f is violated at a sampled point.
class HypothesisViolation : public Error
{
public:
  HypothesisViolation(const std::string &what, double t, double eps, double value)
    : Error(what), t_(t), eps_(eps), value_(value)
  {
  }
  double t() const { return t_; }
  double eps() const { return eps_; }
  double value() const { return value_; }

private:
  double t_, eps_, value_;
};

// (A + I - f'(u*)) is singular, i.e. the equilibrium is not hyperbolic.
class HyperbolicityViolation : public Error
{
public:
  using Error::Error;
};

class NumericalFailure : public Error
{
public:
  using Error::Error;
};

// Trajectory left the blow-up guard ball.
class Divergence : public NumericalFailure
{
public:
  Divergence(const std::string &what, double t) : NumericalFailure(what), t_(t) {}
  double t() const { return t_; }

private:
  double t_;
};

class ResolventPole : public NumericalFailure
{
public:
  using NumericalFailure::NumericalFailure;
};

class NoConvergence : public NumericalFailure
{
public:
  using NumericalFailure::NumericalFailure;
};

class NearBifurcation : public NumericalFailure
{
public:
  using NumericalFailure::NumericalFailure;
};

class DichotomyFailure : public NumericalFailure
{
public:
  using NumericalFailure::NumericalFailure;
};

class ConfigError : public Error
{
public:
  ConfigError(const std::string &what, int line = -1) : Error(what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

}  // namespace sdwave

#endif  // SDWAVE_ERRORS_HPP
