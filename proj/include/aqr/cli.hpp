#pragma once

#include "aqr/csv.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace aqr {

// Command implementations used by the aqr binary; they throw FormulaError /
// DataError / NumericalError, which the binary maps onto exit codes 2/3/4.

struct FitCmdArgs {
  std::string formula;
  std::string data_path;
  std::vector<double> taus;
  std::optional<double> err;
  SchemaHints hints;
  std::string out_path;
};
// Returns true when every quantile fitted and converged.
bool run_fit(const FitCmdArgs& args, std::ostream& status);

struct PredictCmdArgs {
  std::string model_path;
  std::string data_path;
  double level = 0.95;
  bool sandwich = false;
  std::string out_path;
};
void run_predict(const PredictCmdArgs& args, std::ostream& status);

struct CheckCmdArgs {
  std::string model_path;
  std::string data_path;
  std::string out_path;  // report JSON; plot data lands next to it
};
void run_check(const CheckCmdArgs& args, std::ostream& status);

struct EffectsCmdArgs {
  std::string model_path;
  std::string term;  // smooth-term variable name
  int n = 200;
  std::string out_path;
};
void run_effects(const EffectsCmdArgs& args, std::ostream& status);

struct ScoreCmdArgs {
  std::string model_path;
  std::string data_path;
  std::string out_path;
};
void run_score(const ScoreCmdArgs& args, std::ostream& status);

struct SimulateCmdArgs {
  std::string preset;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  std::string out_path;
};
void run_simulate(const SimulateCmdArgs& args, std::ostream& status);

// Path of the plot-data CSV emitted alongside a check report.
std::string plotdata_path_for(const std::string& report_path);

}  // namespace aqr
