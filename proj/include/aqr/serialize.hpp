#pragma once

#include "aqr/csv.hpp"
#include "aqr/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aqr {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kToolVersion = "aqr 0.1.0";

// Versioned on-disk bundle: one preliminary stage, one fit per quantile, and
// enough metadata to reproduce predictions bitwise on reload.
struct ModelFile {
  int schema_version = kModelSchemaVersion;
  std::string tool_version = kToolVersion;
  std::string formula;
  std::optional<double> err;
  std::string data_fingerprint;
  SchemaHints hints;
  std::vector<FittedQuantileModel> fits;
  std::vector<CheckReport> checks;  // snapshot taken at fit time, aligned with fits
};

void save_model_file(const std::string& path, const ModelFile& mf);
ModelFile load_model_file(const std::string& path);

}  // namespace aqr
