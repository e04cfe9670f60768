#include "aqr/serialize.hpp"

#include "aqr/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace aqr {

namespace {

using nlohmann::json;

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

json mat_to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", a}};
}

Matrix mat_from_json(const json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const json& a = j.at("data");
  if (static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw DataError("model file: matrix payload size mismatch");
  Matrix m(rows, cols);
  std::size_t t = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jx = 0; jx < cols; ++jx) m(i, jx) = a[t++].get<double>();
  return m;
}

json term_to_json(const Term& t) {
  return {{"kind", static_cast<int>(t.kind)},   {"variable", t.variable},
          {"by_variable", t.by_variable},       {"basis", static_cast<int>(t.basis)},
          {"k", t.k},                           {"degree", t.degree}};
}

Term term_from_json(const json& j) {
  Term t;
  t.kind = static_cast<TermKind>(j.at("kind").get<int>());
  t.variable = j.at("variable").get<std::string>();
  t.by_variable = j.at("by_variable").get<std::string>();
  t.basis = static_cast<BasisType>(j.at("basis").get<int>());
  t.k = j.at("k").get<int>();
  t.degree = j.at("degree").get<int>();
  return t;
}

json term_design_to_json(const TermDesign& td) {
  return {{"kind", static_cast<int>(td.kind)},
          {"term", term_to_json(td.term)},
          {"label", td.label},
          {"offset", td.offset},
          {"width", td.width},
          {"centering", mat_to_json(td.centering)},
          {"lo", td.lo},
          {"hi", td.hi},
          {"factor_labels", td.factor_labels}};
}

TermDesign term_design_from_json(const json& j) {
  TermDesign td;
  td.kind = static_cast<ColumnKind>(j.at("kind").get<int>());
  td.term = term_from_json(j.at("term"));
  td.label = j.at("label").get<std::string>();
  td.offset = j.at("offset").get<int>();
  td.width = j.at("width").get<int>();
  td.centering = mat_from_json(j.at("centering"));
  td.lo = j.at("lo").get<double>();
  td.hi = j.at("hi").get<double>();
  td.factor_labels = j.at("factor_labels").get<std::vector<std::string>>();
  return td;
}

json predictor_to_json(const LinearPredictor& p) {
  json terms = json::array();
  for (const auto& t : p.terms) terms.push_back(term_design_to_json(t));
  return {{"terms", terms}, {"d", p.d}, {"beta", vec_to_json(p.beta)}};
}

LinearPredictor predictor_from_json(const json& j) {
  LinearPredictor p;
  for (const auto& t : j.at("terms")) p.terms.push_back(term_design_from_json(t));
  p.d = j.at("d").get<int>();
  p.beta = vec_from_json(j.at("beta"));
  return p;
}

json trace_to_json(const CalibrationTrace& t) {
  json evals = json::array();
  for (const auto& e : t.evaluations)
    evals.push_back({{"log_sigma0", e.log_sigma0},
                     {"ikl", std::isfinite(e.ikl) ? json(e.ikl) : json()},
                     {"converged_inner", e.converged_inner}});
  return {{"evaluations", evals},
          {"bracket_lo", t.bracket_lo},
          {"bracket_hi", t.bracket_hi},
          {"argmin", t.argmin},
          {"tolerance_achieved", t.tolerance_achieved},
          {"discontinuity", t.discontinuity},
          {"boundary_warning", t.boundary_warning}};
}

CalibrationTrace trace_from_json(const json& j) {
  CalibrationTrace t;
  for (const auto& e : j.at("evaluations")) {
    CalibrationEvaluation ev;
    ev.log_sigma0 = e.at("log_sigma0").get<double>();
    ev.ikl = e.at("ikl").is_null() ? std::numeric_limits<double>::infinity()
                                   : e.at("ikl").get<double>();
    ev.converged_inner = e.at("converged_inner").get<bool>();
    t.evaluations.push_back(ev);
  }
  t.bracket_lo = j.at("bracket_lo").get<double>();
  t.bracket_hi = j.at("bracket_hi").get<double>();
  t.argmin = j.at("argmin").get<double>();
  t.tolerance_achieved = j.at("tolerance_achieved").get<double>();
  t.discontinuity = j.at("discontinuity").get<bool>();
  t.boundary_warning = j.at("boundary_warning").get<bool>();
  return t;
}

json shash_to_json(const SinhArcsinhFit& s) {
  return {{"mu", s.mu}, {"scale", s.scale}, {"eps", s.eps}, {"delta", s.delta},
          {"fallback", s.fallback}};
}

SinhArcsinhFit shash_from_json(const json& j) {
  SinhArcsinhFit s;
  s.mu = j.at("mu").get<double>();
  s.scale = j.at("scale").get<double>();
  s.eps = j.at("eps").get<double>();
  s.delta = j.at("delta").get<double>();
  s.fallback = j.at("fallback").get<bool>();
  return s;
}

json check_to_json(const CheckReport& c) {
  json bins = json::array();
  for (const auto& b : c.binned_props)
    bins.push_back({{"mu_lo", b.mu_lo}, {"mu_hi", b.mu_hi}, {"count", b.count},
                    {"proportion", b.proportion}, {"lo", b.lo}, {"hi", b.hi}});
  json edf = json::array();
  for (const auto& e : c.edf_vs_kprime)
    edf.push_back({{"label", e.label}, {"k_prime", e.k_prime}, {"edf", e.edf}});
  return {{"theor_prop_neg", c.theor_prop_neg},
          {"actual_prop_neg", c.actual_prop_neg},
          {"integrated_abs_bias", c.integrated_abs_bias},
          {"binned_props", bins},
          {"edf_vs_kprime", edf},
          {"laml_grad_lo", c.laml_grad_lo},
          {"laml_grad_hi", c.laml_grad_hi},
          {"laml_converged", c.laml_converged},
          {"laml_hessian_pd", c.laml_hessian_pd},
          {"laml_hessian_checked", c.laml_hessian_checked},
          {"model_rank", c.model_rank},
          {"model_dim", c.model_dim}};
}

CheckReport check_from_json(const json& j) {
  CheckReport c;
  c.theor_prop_neg = j.at("theor_prop_neg").get<double>();
  c.actual_prop_neg = j.at("actual_prop_neg").get<double>();
  c.integrated_abs_bias = j.at("integrated_abs_bias").get<double>();
  for (const auto& b : j.at("binned_props"))
    c.binned_props.push_back({b.at("mu_lo").get<double>(), b.at("mu_hi").get<double>(),
                              b.at("count").get<int>(), b.at("proportion").get<double>(),
                              b.at("lo").get<double>(), b.at("hi").get<double>()});
  for (const auto& e : j.at("edf_vs_kprime"))
    c.edf_vs_kprime.push_back(
        {e.at("label").get<std::string>(), e.at("k_prime").get<int>(), e.at("edf").get<double>()});
  c.laml_grad_lo = j.at("laml_grad_lo").get<double>();
  c.laml_grad_hi = j.at("laml_grad_hi").get<double>();
  c.laml_converged = j.at("laml_converged").get<bool>();
  c.laml_hessian_pd = j.at("laml_hessian_pd").get<bool>();
  c.laml_hessian_checked = j.at("laml_hessian_checked").get<bool>();
  c.model_rank = j.at("model_rank").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  return c;
}

json fit_to_json(const FittedQuantileModel& m) {
  json terms = json::array();
  for (const auto& t : m.terms) terms.push_back(term_design_to_json(t));
  json j = {{"formula", m.formula},
            {"tau", m.tau},
            {"sigma0", m.sigma0},
            {"lambda", m.lambda},
            {"h_star", vec_to_json(m.h_star)},
            {"sigma_tilde", vec_to_json(m.sigma_tilde)},
            {"beta", vec_to_json(m.beta)},
            {"gamma", vec_to_json(m.gamma)},
            {"V", mat_to_json(m.V)},
            {"V_s", mat_to_json(m.V_s)},
            {"edf_total", m.edf_total},
            {"edf_per_term", m.edf_per_term},
            {"Mp", m.Mp},
            {"laml", m.laml},
            {"penalized_deviance", m.penalized_deviance},
            {"calibration", trace_to_json(m.calibration)},
            {"d_alpha", m.d_alpha},
            {"shash", shash_to_json(m.shash)},
            {"bandwidth_capped", m.bandwidth_capped},
            {"ls_converged", m.ls_converged},
            {"terms", terms},
            {"d", m.d},
            {"ls_mean", predictor_to_json(m.ls_mean)},
            {"kappa_const", m.kappa_const},
            {"converged_inner", m.converged_inner},
            {"converged_laml", m.converged_laml},
            {"laml_grad", vec_to_json(m.laml_grad)},
            {"laml_hessian_pd", m.laml_hessian_pd},
            {"laml_hessian_checked", m.laml_hessian_checked}};
  j["err"] = m.err ? json(*m.err) : json();
  j["ls_variance"] = m.ls_variance ? predictor_to_json(*m.ls_variance) : json();
  return j;
}

FittedQuantileModel fit_from_json(const json& j) {
  FittedQuantileModel m;
  m.formula = j.at("formula").get<std::string>();
  m.spec = parse_formula(m.formula);
  m.tau = j.at("tau").get<double>();
  m.sigma0 = j.at("sigma0").get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.h_star = vec_from_json(j.at("h_star"));
  m.sigma_tilde = vec_from_json(j.at("sigma_tilde"));
  m.beta = vec_from_json(j.at("beta"));
  m.gamma = vec_from_json(j.at("gamma"));
  m.V = mat_from_json(j.at("V"));
  m.V_s = mat_from_json(j.at("V_s"));
  m.edf_total = j.at("edf_total").get<double>();
  m.edf_per_term = j.at("edf_per_term").get<std::vector<double>>();
  m.Mp = j.at("Mp").get<int>();
  m.laml = j.at("laml").get<double>();
  m.penalized_deviance = j.at("penalized_deviance").get<double>();
  m.calibration = trace_from_json(j.at("calibration"));
  m.d_alpha = j.at("d_alpha").get<double>();
  m.shash = shash_from_json(j.at("shash"));
  m.bandwidth_capped = j.at("bandwidth_capped").get<bool>();
  m.ls_converged = j.at("ls_converged").get<bool>();
  if (!j.at("err").is_null()) m.err = j.at("err").get<double>();
  for (const auto& t : j.at("terms")) m.terms.push_back(term_design_from_json(t));
  m.d = j.at("d").get<int>();
  m.ls_mean = predictor_from_json(j.at("ls_mean"));
  if (!j.at("ls_variance").is_null()) m.ls_variance = predictor_from_json(j.at("ls_variance"));
  m.kappa_const = j.at("kappa_const").get<double>();
  m.converged_inner = j.at("converged_inner").get<bool>();
  m.converged_laml = j.at("converged_laml").get<bool>();
  m.laml_grad = vec_from_json(j.at("laml_grad"));
  m.laml_hessian_pd = j.at("laml_hessian_pd").get<bool>();
  m.laml_hessian_checked = j.at("laml_hessian_checked").get<bool>();
  return m;
}

}  // namespace

void save_model_file(const std::string& path, const ModelFile& mf) {
  json fits = json::array();
  for (const auto& f : mf.fits) fits.push_back(fit_to_json(f));
  json checks = json::array();
  for (const auto& c : mf.checks) checks.push_back(check_to_json(c));
  json j = {{"schema_version", mf.schema_version},
            {"tool_version", mf.tool_version},
            {"formula", mf.formula},
            {"err", mf.err ? json(*mf.err) : json()},
            {"data_fingerprint", mf.data_fingerprint},
            {"factors", mf.hints.factors},
            {"matrix_groups", mf.hints.matrix_groups},
            {"fits", fits},
            {"checks", checks}};
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << j.dump(1, '\t') << "\n";
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move temporary file onto '" + path + "'");
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    ModelFile mf;
    mf.schema_version = j.at("schema_version").get<int>();
    if (mf.schema_version != kModelSchemaVersion)
      throw DataError("unsupported model schema version " + std::to_string(mf.schema_version));
    mf.tool_version = j.at("tool_version").get<std::string>();
    mf.formula = j.at("formula").get<std::string>();
    if (!j.at("err").is_null()) mf.err = j.at("err").get<double>();
    mf.data_fingerprint = j.at("data_fingerprint").get<std::string>();
    mf.hints.factors = j.at("factors").get<std::vector<std::string>>();
    mf.hints.matrix_groups = j.at("matrix_groups").get<std::map<std::string, int>>();
    for (const auto& f : j.at("fits")) mf.fits.push_back(fit_from_json(f));
    for (const auto& c : j.at("checks")) mf.checks.push_back(check_from_json(c));
    return mf;
  } catch (const json::exception& e) {
    throw DataError("model file '" + path + "' is malformed: " + e.what());
  }
}

}  // namespace aqr
