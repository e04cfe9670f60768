#include "aqr/cli.hpp"
#include "aqr/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<double> parse_tau_list(const std::string& s) {
  std::vector<double> taus;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(item, &used);
    if (used != item.size()) throw aqr::DataError("bad quantile '" + item + "' in --qu");
    taus.push_back(v);
  }
  return taus;
}

std::map<std::string, int> parse_matrix_groups(const std::vector<std::string>& specs) {
  std::map<std::string, int> groups;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw aqr::DataError("--matrix expects name=m, got '" + s + "'");
    groups[s.substr(0, eq)] = std::stoi(s.substr(eq + 1));
  }
  return groups;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive quantile regression: fit, predict, diagnose, score"};
  app.require_subcommand(1);

  aqr::FitCmdArgs fit;
  std::string qu_list;
  std::vector<std::string> factor_list, matrix_list;
  double err_value = -1.0;
  auto* cmd_fit = app.add_subcommand("fit", "Fit quantile models from a CSV file");
  cmd_fit->add_option("--formula", fit.formula, "Model formula")->required();
  cmd_fit->add_option("--data", fit.data_path, "Training CSV")->required();
  cmd_fit->add_option("--qu", qu_list, "Comma-separated quantiles, strictly increasing")->required();
  cmd_fit->add_option("--err", err_value, "Manual bias budget in (0, 1)");
  cmd_fit->add_option("--factors", factor_list, "Factor column names")->delimiter(',');
  cmd_fit->add_option("--matrix", matrix_list, "Matrix groups as name=m")->delimiter(',');
  cmd_fit->add_option("--out", fit.out_path, "Output model JSON")->required();

  aqr::PredictCmdArgs pred;
  auto* cmd_predict = app.add_subcommand("predict", "Predict quantiles with credible intervals");
  cmd_predict->add_option("--model", pred.model_path, "Model JSON")->required();
  cmd_predict->add_option("--data", pred.data_path, "CSV with covariates")->required();
  cmd_predict->add_option("--level", pred.level, "Credible level, default 0.95");
  cmd_predict->add_flag("--sandwich", pred.sandwich, "Use the sandwich covariance for intervals");
  cmd_predict->add_option("--out", pred.out_path, "Output CSV")->required();

  aqr::CheckCmdArgs chk;
  auto* cmd_check = app.add_subcommand("check", "Diagnostics report and plot data");
  cmd_check->add_option("--model", chk.model_path, "Model JSON")->required();
  cmd_check->add_option("--data", chk.data_path, "Training CSV")->required();
  cmd_check->add_option("--out", chk.out_path, "Report JSON (plot data CSV lands next to it)")
      ->required();

  aqr::EffectsCmdArgs eff;
  auto* cmd_effects = app.add_subcommand("effects", "Smooth-effect curves with intervals");
  cmd_effects->add_option("--model", eff.model_path, "Model JSON")->required();
  cmd_effects->add_option("--term", eff.term, "Smooth-term variable name")->required();
  cmd_effects->add_option("--n", eff.n, "Grid size, default 200");
  cmd_effects->add_option("--out", eff.out_path, "Output CSV")->required();

  aqr::ScoreCmdArgs score;
  auto* cmd_score = app.add_subcommand("score", "Per-quantile pinball totals on a data set");
  cmd_score->add_option("--model", score.model_path, "Model JSON")->required();
  cmd_score->add_option("--data", score.data_path, "CSV with covariates and response")->required();
  cmd_score->add_option("--out", score.out_path, "Output CSV")->required();

  aqr::SimulateCmdArgs sim;
  auto* cmd_simulate = app.add_subcommand("simulate", "Write a synthetic data set");
  cmd_simulate->add_option("--preset", sim.preset, "appendixA | heteroNormal | sine")->required();
  cmd_simulate->add_option("--n", sim.n, "Number of rows")->required();
  cmd_simulate->add_option("--seed", sim.seed, "PRNG seed")->required();
  cmd_simulate->add_option("--out", sim.out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_fit->parsed()) {
      fit.taus = parse_tau_list(qu_list);
      if (err_value >= 0.0) fit.err = err_value;
      fit.hints.factors = factor_list;
      fit.hints.matrix_groups = parse_matrix_groups(matrix_list);
      return aqr::run_fit(fit, std::cout) ? 0 : 4;
    }
    if (cmd_predict->parsed()) aqr::run_predict(pred, std::cout);
    if (cmd_check->parsed()) aqr::run_check(chk, std::cout);
    if (cmd_effects->parsed()) aqr::run_effects(eff, std::cout);
    if (cmd_score->parsed()) aqr::run_score(score, std::cout);
    if (cmd_simulate->parsed()) aqr::run_simulate(sim, std::cout);
    return 0;
  } catch (const aqr::FormulaError& e) {
    std::cerr << "formula error at position " << e.position() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const aqr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const aqr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
