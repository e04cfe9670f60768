#include "aqr/elf.hpp"

#include "aqr/errors.hpp"
#include "aqr/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace aqr {

namespace {

void check_params(double tau, double lambda) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("elf: tau must lie in (0, 1)");
  if (!(lambda > 0.0)) throw std::invalid_argument("elf: lambda must be positive");
}

}  // namespace

ElfParams::ElfParams(double tau_, double lambda_, Vector sigma_)
    : tau(tau_), lambda(lambda_), sigma(std::move(sigma_)) {
  check_params(tau, lambda);
  if (sigma.size() == 0 || (sigma.array() <= 0.0).any())
    throw std::invalid_argument("elf: all sigma must be positive");
}

ElfParams::ElfParams(double tau_, double lambda_, double sigma_scalar, Eigen::Index n)
    : ElfParams(tau_, lambda_, Vector::Constant(n, sigma_scalar)) {}

double pinball(double z, double tau, double sigma) {
  return z < 0.0 ? (tau - 1.0) * z / sigma : tau * z / sigma;
}

double elf_loss(double z, double tau, double lambda, double sigma) {
  return (tau - 1.0) * z / sigma + lambda * softplus(z / (lambda * sigma));
}

double elf_logpdf(double y, double mu, double tau, double lambda, double sigma) {
  double z = y - mu;
  double norm = std::log(lambda * sigma) + log_beta(lambda * (1.0 - tau), lambda * tau);
  return (1.0 - tau) * z / sigma - lambda * softplus(z / (lambda * sigma)) - norm;
}

std::pair<double, double> elf_derivs(double y, double mu, double tau, double lambda, double sigma) {
  double s = sigmoid((y - mu) / (lambda * sigma));
  double d1 = (s - (1.0 - tau)) / sigma;
  double d2 = -s * (1.0 - s) / (lambda * sigma * sigma);
  return {d1, d2};
}

double elf_saturated_mu(double y, double tau, double lambda, double sigma) {
  return y - lambda * sigma * std::log((1.0 - tau) / tau);
}

DevianceResult deviance_and_saturated(const Vector& y, const Vector& mu, const ElfParams& p) {
  if (y.size() != mu.size() || y.size() != p.sigma.size())
    throw std::invalid_argument("deviance_and_saturated: length mismatch");
  DevianceResult out;
  out.dev.resize(y.size());
  out.ll_sat = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double mu_star = elf_saturated_mu(y[i], p.tau, p.lambda, p.sigma[i]);
    double ll_sat_i = elf_logpdf(y[i], mu_star, p.tau, p.lambda, p.sigma[i]);
    double ll_i = elf_logpdf(y[i], mu[i], p.tau, p.lambda, p.sigma[i]);
    out.dev[i] = 2.0 * (ll_sat_i - ll_i);
    out.ll_sat += ll_sat_i;
  }
  return out;
}

}  // namespace aqr
