#include "aqr/family.hpp"

#include <cmath>
#include <stdexcept>

namespace aqr {

ElfFamily::ElfFamily(Vector y, ElfParams params) : y_(std::move(y)), params_(std::move(params)) {
  if (y_.size() != params_.sigma.size())
    throw std::invalid_argument("ElfFamily: y and sigma lengths differ");
  saturated_.resize(y_.size());
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    double mu_star = elf_saturated_mu(y_[i], params_.tau, params_.lambda, params_.sigma[i]);
    saturated_[i] = elf_logpdf(y_[i], mu_star, params_.tau, params_.lambda, params_.sigma[i]);
  }
}

double ElfFamily::loglik(Eigen::Index i, double eta) const {
  return elf_logpdf(y_[i], eta, params_.tau, params_.lambda, params_.sigma[i]);
}

double ElfFamily::d1(Eigen::Index i, double eta) const {
  return elf_derivs(y_[i], eta, params_.tau, params_.lambda, params_.sigma[i]).first;
}

double ElfFamily::weight(Eigen::Index i, double eta) const {
  return -elf_derivs(y_[i], eta, params_.tau, params_.lambda, params_.sigma[i]).second;
}

double ElfFamily::saturated(Eigen::Index i) const { return saturated_[i]; }

GaussianFamily::GaussianFamily(Vector y, Vector kappa)
    : y_(std::move(y)), kappa_(std::move(kappa)) {
  if (y_.size() != kappa_.size())
    throw std::invalid_argument("GaussianFamily: y and kappa lengths differ");
  if ((kappa_.array() <= 0.0).any()) throw std::invalid_argument("GaussianFamily: kappa must be positive");
}

double GaussianFamily::loglik(Eigen::Index i, double eta) const {
  double r = (y_[i] - eta) / kappa_[i];
  return -0.5 * r * r - std::log(kappa_[i]) - 0.5 * std::log(2.0 * M_PI);
}

double GaussianFamily::d1(Eigen::Index i, double eta) const {
  return (y_[i] - eta) / (kappa_[i] * kappa_[i]);
}

double GaussianFamily::weight(Eigen::Index i, double) const {
  return 1.0 / (kappa_[i] * kappa_[i]);
}

double GaussianFamily::saturated(Eigen::Index i) const {
  return -std::log(kappa_[i]) - 0.5 * std::log(2.0 * M_PI);
}

GammaLogFamily::GammaLogFamily(Vector u) : u_(std::move(u)) {
  if (u_.size() == 0) throw std::invalid_argument("GammaLogFamily: empty response");
  double floor = 1e-10 * (u_.mean() + 1e-300);
  u_ = u_.cwiseMax(floor);
}

double GammaLogFamily::loglik(Eigen::Index i, double eta) const {
  return -0.5 * (std::log(2.0 * M_PI) + std::log(u_[i]) + eta + u_[i] * std::exp(-eta));
}

double GammaLogFamily::d1(Eigen::Index i, double eta) const {
  return 0.5 * (u_[i] * std::exp(-eta) - 1.0);
}

double GammaLogFamily::saturated(Eigen::Index i) const {
  return -0.5 * (std::log(2.0 * M_PI) + 2.0 * std::log(u_[i]) + 1.0);
}

}  // namespace aqr
