#include "aqr/cli.hpp"

#include "aqr/errors.hpp"
#include "aqr/model.hpp"
#include "aqr/serialize.hpp"
#include "aqr/simulate.hpp"
#include "aqr/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace aqr {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

ModelFile load_and_note(const std::string& model_path) { return load_model_file(model_path); }

void warn_fingerprint(const ModelFile& mf, const std::string& data_path, std::ostream& status) {
  if (!mf.data_fingerprint.empty() && fingerprint_file(data_path) != mf.data_fingerprint)
    status << "warning: '" << data_path
           << "' does not match the training-data fingerprint stored in the model\n";
}

}  // namespace

std::string plotdata_path_for(const std::string& report_path) {
  std::string stem = report_path;
  auto dot = stem.rfind('.');
  auto sep = stem.find_last_of("/\\");
  if (dot != std::string::npos && (sep == std::string::npos || dot > sep)) stem.resize(dot);
  return stem + "_plotdata.csv";
}

bool run_fit(const FitCmdArgs& args, std::ostream& status) {
  ModelSpec spec = parse_formula(args.formula);
  if (args.taus.empty()) throw std::invalid_argument("no quantiles requested (--qu)");
  Dataset data = ingest_csv(args.data_path, args.hints);

  FitOptions options;
  options.err = args.err;
  MultiFitResult result = fit_multi(spec, data, args.taus, options);

  ModelFile mf;
  mf.formula = render_formula(spec);
  mf.err = args.err;
  mf.data_fingerprint = fingerprint_file(args.data_path);
  mf.hints = args.hints;

  bool all_ok = true;
  status << "tau      sigma0       lambda       edf      ikl        status\n";
  for (std::size_t i = 0; i < args.taus.size(); ++i) {
    const auto& fit = result.fits[i];
    if (!fit) {
      all_ok = false;
      status << fmt_short(args.taus[i]) << "  failed: " << result.errors[i] << "\n";
      continue;
    }
    bool ok = fit->converged_inner;
    all_ok = all_ok && ok;
    status << fmt_short(fit->tau) << "   " << fmt_short(fit->sigma0) << "   "
           << fmt_short(fit->lambda) << "   " << fmt_short(fit->edf_total) << "   "
           << fmt_short(fit->calibration.evaluations.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : [&] {
                                double best = std::numeric_limits<double>::infinity();
                                for (const auto& e : fit->calibration.evaluations)
                                  best = std::min(best, e.ikl);
                                return best;
                              }())
           << "   " << (ok ? "converged" : "NOT CONVERGED")
           << (fit->converged_laml ? "" : " (smoothing-selection gradient not tight)") << "\n";
    mf.fits.push_back(*fit);
    mf.checks.push_back(check(*fit));
  }
  if (mf.fits.empty()) throw NumericalError("every requested quantile failed to fit");
  save_model_file(args.out_path, mf);
  status << "wrote " << args.out_path << "\n";
  return all_ok;
}

void run_predict(const PredictCmdArgs& args, std::ostream& status) {
  ModelFile mf = load_and_note(args.model_path);
  Dataset data = ingest_csv(args.data_path, mf.hints);
  if (!(args.level >= 0.0 && args.level < 1.0))
    throw std::invalid_argument("--level must lie in [0, 1)");
  double z = args.level == 0.0 ? 0.0 : normal_quantile(0.5 * (1.0 + args.level));

  std::vector<std::vector<std::string>> rows;
  for (const auto& fit : mf.fits) {
    Prediction pred = predict(fit, data, true, args.sandwich);
    for (Eigen::Index i = 0; i < data.n; ++i) {
      rows.push_back({std::to_string(i), fmt(fit.tau), fmt(pred.mu[i]), fmt(pred.se[i]),
                      fmt(pred.mu[i] - z * pred.se[i]), fmt(pred.mu[i] + z * pred.se[i]),
                      pred.clamped[i] ? "1" : "0"});
    }
  }
  write_csv(args.out_path, {"row_id", "tau", "fit", "se", "lo", "hi", "clamped_flag"}, rows);
  status << "wrote " << args.out_path << "\n";
}

void run_check(const CheckCmdArgs& args, std::ostream& status) {
  ModelFile mf = load_and_note(args.model_path);
  warn_fingerprint(mf, args.data_path, status);
  Dataset data = ingest_csv(args.data_path, mf.hints);

  nlohmann::json reports = nlohmann::json::array();
  std::vector<std::vector<std::string>> plot_rows;
  for (const auto& fit : mf.fits) {
    CheckReport rep = check(fit, data);

    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : rep.binned_props)
      bins.push_back({{"mu_lo", b.mu_lo}, {"mu_hi", b.mu_hi}, {"count", b.count},
                      {"proportion", b.proportion}, {"lo", b.lo}, {"hi", b.hi}});
    nlohmann::json edf = nlohmann::json::array();
    for (const auto& e : rep.edf_vs_kprime)
      edf.push_back({{"term", e.label}, {"k_prime", e.k_prime}, {"edf", e.edf}});
    reports.push_back({{"tau", fit.tau},
                       {"theor_prop_neg", rep.theor_prop_neg},
                       {"actual_prop_neg", rep.actual_prop_neg},
                       {"integrated_abs_bias", rep.integrated_abs_bias},
                       {"binned_props", bins},
                       {"edf_vs_kprime", edf},
                       {"laml", {{"grad_lo", rep.laml_grad_lo},
                                 {"grad_hi", rep.laml_grad_hi},
                                 {"converged", rep.laml_converged},
                                 {"hessian_pd", rep.laml_hessian_pd},
                                 {"hessian_checked", rep.laml_hessian_checked}}},
                       {"model_rank", rep.model_rank},
                       {"model_dim", rep.model_dim},
                       {"calibration_discontinuity", fit.calibration.discontinuity}});

    // Plot data: binned proportions, calibration trace, bias histogram.
    int idx = 0;
    for (const auto& b : rep.binned_props)
      plot_rows.push_back({fmt(fit.tau), "bin", std::to_string(idx++),
                           fmt(0.5 * (b.mu_lo + b.mu_hi)), fmt(b.proportion), fmt(b.lo),
                           fmt(b.hi), std::to_string(b.count)});
    idx = 0;
    for (const auto& e : fit.calibration.evaluations)
      plot_rows.push_back({fmt(fit.tau), "calibration", std::to_string(idx++),
                           fmt(e.log_sigma0),
                           std::isfinite(e.ikl) ? fmt(e.ikl) : "inf", "", "",
                           e.converged_inner ? "1" : "0"});

    Prediction pred = predict(fit, data, false);
    Vector alpha = fit.alpha_at(data);
    Vector kappa = fit.kappa_at(data);
    const Vector& y = data.scalars.at(fit.spec.response);
    (void)y;
    std::vector<double> bias(data.n);
    for (Eigen::Index i = 0; i < data.n; ++i)
      bias[i] = std::abs(fit.shash.cdf((pred.mu[i] - alpha[i]) / kappa[i]) - fit.tau);
    const int nb = 20;
    double bmax = *std::max_element(bias.begin(), bias.end());
    if (!(bmax > 0)) bmax = 1.0;
    std::vector<int> counts(nb, 0);
    for (double v : bias) {
      int b = std::min(nb - 1, static_cast<int>(std::floor(v / bmax * nb)));
      ++counts[b];
    }
    for (int b = 0; b < nb; ++b)
      plot_rows.push_back({fmt(fit.tau), "bias_hist", std::to_string(b),
                           fmt((b + 0.5) * bmax / nb), std::to_string(counts[b]), "", "", ""});
  }

  {
    std::string tmp = args.out_path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << reports.dump(1, '\t') << "\n";
    out.close();
    if (std::rename(tmp.c_str(), args.out_path.c_str()) != 0)
      throw DataError("cannot move temporary file onto '" + args.out_path + "'");
  }
  std::string plot_path = plotdata_path_for(args.out_path);
  write_csv(plot_path, {"tau", "kind", "index", "x", "value", "lo", "hi", "count"}, plot_rows);
  status << "wrote " << args.out_path << " and " << plot_path << "\n";
}

void run_effects(const EffectsCmdArgs& args, std::ostream& status) {
  ModelFile mf = load_and_note(args.model_path);
  if (args.n < 2) throw std::invalid_argument("--n must be at least 2");

  std::vector<std::vector<std::string>> rows;
  for (const auto& fit : mf.fits) {
    const TermDesign* td = nullptr;
    for (const auto& t : fit.terms)
      if ((t.kind == ColumnKind::Smooth || t.kind == ColumnKind::FunctionalSmooth) &&
          t.term.variable == args.term)
        td = &t;
    if (!td) throw DataError("'" + args.term + "' is not a smooth term of this model");

    Vector grid(args.n);
    for (int i = 0; i < args.n; ++i)
      grid[i] = td->lo + (td->hi - td->lo) * i / (args.n - 1);
    Matrix B = smooth_term_curve(*td, grid, OutOfRange::Reject);
    Vector beta_blk = fit.beta.segment(td->offset, td->width);
    Matrix V_blk = fit.V.block(td->offset, td->offset, td->width, td->width);
    Vector effect = B * beta_blk;
    double z = normal_quantile(0.975);
    for (int i = 0; i < args.n; ++i) {
      double se = std::sqrt(std::max(0.0, double(B.row(i) * V_blk * B.row(i).transpose())));
      rows.push_back({fmt(fit.tau), fmt(grid[i]), fmt(effect[i]), fmt(se),
                      fmt(effect[i] - z * se), fmt(effect[i] + z * se)});
    }
  }
  write_csv(args.out_path, {"tau", "x", "effect", "se", "lo", "hi"}, rows);
  status << "wrote " << args.out_path << "\n";
}

void run_score(const ScoreCmdArgs& args, std::ostream& status) {
  ModelFile mf = load_and_note(args.model_path);
  Dataset data = ingest_csv(args.data_path, mf.hints);
  std::vector<std::vector<std::string>> rows;
  for (const auto& fit : mf.fits) {
    auto it = data.scalars.find(fit.spec.response);
    if (it == data.scalars.end())
      throw DataError("missing response column '" + fit.spec.response + "'");
    Prediction pred = predict(fit, data, false);
    Matrix p(data.n, 1);
    p.col(0) = pred.mu;
    Vector score = pinball_score(it->second, p, {fit.tau});
    rows.push_back({fmt(fit.tau), fmt(score[0])});
  }
  write_csv(args.out_path, {"tau", "pinball"}, rows);
  status << "wrote " << args.out_path << "\n";
}

void run_simulate(const SimulateCmdArgs& args, std::ostream& status) {
  Dataset data = simulate_preset(args.preset, args.n, args.seed);
  const Vector& x = data.scalars.at("x");
  const Vector& y = data.scalars.at("y");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(data.n);
  for (Eigen::Index i = 0; i < data.n; ++i) rows.push_back({fmt(x[i]), fmt(y[i])});
  write_csv(args.out_path, {"x", "y"}, rows);
  status << "wrote " << args.out_path << " (" << data.n << " rows, preset " << args.preset
         << ", seed " << args.seed << ")\n";
}

}  // namespace aqr
