#pragma once

#include "aqr/types.hpp"

#include <utility>

namespace aqr {

// Parameters of the smoothed pinball (ELF) loss family: quantile level tau,
// smoothness lambda, and a per-observation scale sigma(x_i). The bandwidth
// h_i = lambda * sigma_i is the scale of the logistic kernel doing the
// smoothing.
struct ElfParams {
  double tau;
  double lambda;
  Vector sigma;

  ElfParams(double tau_, double lambda_, Vector sigma_);
  ElfParams(double tau_, double lambda_, double sigma_scalar, Eigen::Index n = 1);

  double h(Eigen::Index i) const { return lambda * sigma[i]; }
};

// Scaled pinball loss rho_tau(z) = (tau - 1) z / sigma for z < 0, tau z / sigma
// otherwise.
double pinball(double z, double tau, double sigma);

// Smoothed loss (tau - 1) z / sigma + lambda log(1 + exp(z / (lambda sigma))).
// Exceeds the pinball loss by at most lambda log 2, attained at z = 0.
double elf_loss(double z, double tau, double lambda, double sigma);

// Log-density of the normalized ELF distribution at y with location mu.
double elf_logpdf(double y, double mu, double tau, double lambda, double sigma);

// (d/dmu, d2/dmu2) of elf_logpdf; the second derivative is strictly negative.
std::pair<double, double> elf_derivs(double y, double mu, double tau, double lambda, double sigma);

// Location maximizing the log-density for fixed y (the saturated point):
// mu* = y - lambda sigma log((1 - tau) / tau).
double elf_saturated_mu(double y, double tau, double lambda, double sigma);

struct DevianceResult {
  Vector dev;       // per-observation deviance components, all >= 0
  double ll_sat;    // total saturated log-likelihood
};

// Dev_i = 2 (ll_sat_i - logpdf_i), plus the summed saturated log-likelihood.
DevianceResult deviance_and_saturated(const Vector& y, const Vector& mu, const ElfParams& p);

}  // namespace aqr
