#pragma once

#include "aqr/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace aqr {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Strict RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line
// endings. Ragged rows raise DataError with row/column coordinates.
CsvTable read_csv(const std::string& path);

// Atomic writer (temp file + rename); quotes fields only when needed.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct SchemaHints {
  std::vector<std::string> factors;
  std::map<std::string, int> matrix_groups;  // prefix -> m, columns prefix_1..prefix_m
};

// Typed ingestion: declared factors become level-coded columns, declared
// matrix groups are assembled from their numbered columns, everything else
// must parse as a finite double. Errors carry row/column coordinates.
Dataset ingest_csv(const std::string& path, const SchemaHints& hints = {});
Dataset dataset_from_table(const CsvTable& table, const SchemaHints& hints);

// FNV-1a 64-bit content hash, hex-encoded; used as the data fingerprint.
std::string fingerprint_file(const std::string& path);

}  // namespace aqr
