#pragma once

#include "aqr/elf.hpp"
#include "aqr/types.hpp"

namespace aqr {

// Per-observation log-likelihood pieces consumed by the penalized IRLS and
// marginal-likelihood machinery. eta is the linear predictor.
class Family {
 public:
  virtual ~Family() = default;
  virtual Eigen::Index n() const = 0;
  virtual double loglik(Eigen::Index i, double eta) const = 0;
  virtual double d1(Eigen::Index i, double eta) const = 0;      // d loglik / d eta
  virtual double weight(Eigen::Index i, double eta) const = 0;  // positive curvature
  virtual double saturated(Eigen::Index i) const = 0;
  virtual double init_response(Eigen::Index i) const = 0;       // for the least-squares start
};

// Smoothed-pinball response; weights are the observed -d2.
class ElfFamily final : public Family {
 public:
  ElfFamily(Vector y, ElfParams params);
  Eigen::Index n() const override { return y_.size(); }
  double loglik(Eigen::Index i, double eta) const override;
  double d1(Eigen::Index i, double eta) const override;
  double weight(Eigen::Index i, double eta) const override;
  double saturated(Eigen::Index i) const override;
  double init_response(Eigen::Index i) const override { return y_[i]; }
  const ElfParams& params() const { return params_; }
  const Vector& y() const { return y_; }

 private:
  Vector y_;
  ElfParams params_;
  Vector saturated_;  // cached per-observation saturated log-likelihood
};

// Gaussian with known per-observation standard deviation.
class GaussianFamily final : public Family {
 public:
  GaussianFamily(Vector y, Vector kappa);
  Eigen::Index n() const override { return y_.size(); }
  double loglik(Eigen::Index i, double eta) const override;
  double d1(Eigen::Index i, double eta) const override;
  double weight(Eigen::Index i, double eta) const override;
  double saturated(Eigen::Index i) const override;
  double init_response(Eigen::Index i) const override { return y_[i]; }

 private:
  Vector y_;
  Vector kappa_;
};

// Squared residuals u = e^2 modelled as kappa^2 * chi^2_1 with eta = log
// kappa^2; Fisher weights keep the working system positive definite.
class GammaLogFamily final : public Family {
 public:
  explicit GammaLogFamily(Vector u);
  Eigen::Index n() const override { return u_.size(); }
  double loglik(Eigen::Index i, double eta) const override;
  double d1(Eigen::Index i, double eta) const override;
  double weight(Eigen::Index, double) const override { return 0.5; }
  double saturated(Eigen::Index i) const override;
  double init_response(Eigen::Index i) const override { return std::log(u_[i]); }

 private:
  Vector u_;  // floored away from zero on construction
};

}  // namespace aqr
