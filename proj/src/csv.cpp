#include "aqr/csv.hpp"

#include "aqr/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace aqr {

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text,
                                                    const std::string& path) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&]() {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw DataError(path + ": stray quote inside unquoted field (record " +
                          std::to_string(records.size() + 1) + ")");
        in_quotes = true;
        field_started = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_record();
        ++i;
        break;
      default:
        field += c;
        field_started = true;
        ++i;
        break;
    }
  }
  if (in_quotes) throw DataError(path + ": unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  auto records = parse_records(buf.str(), path);
  if (records.empty()) throw DataError(path + ": empty file");
  CsvTable table;
  table.header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw DataError(path + ": row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto quote = [](const std::string& s) -> std::string {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
    return out;
  };
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    for (std::size_t j = 0; j < header.size(); ++j)
      out << (j ? "," : "") << quote(header[j]);
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << quote(row[j]);
      out << "\n";
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move temporary file onto '" + path + "'");
}

namespace {

double parse_double(const std::string& cell, std::size_t row, const std::string& col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(begin, &end);
  bool fully_consumed = end == begin + cell.size() && !cell.empty();
  if (!fully_consumed || errno == ERANGE || !std::isfinite(v))
    throw DataError("non-numeric cell '" + cell + "' at row " + std::to_string(row + 1) +
                    ", column '" + col + "'");
  return v;
}

}  // namespace

Dataset dataset_from_table(const CsvTable& table, const SchemaHints& hints) {
  std::map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) throw DataError("empty column name in header");
    if (!col_index.emplace(table.header[j], j).second)
      throw DataError("duplicate column '" + table.header[j] + "' in header");
  }
  const std::size_t n = table.rows.size();
  if (n == 0) throw DataError("no data rows");

  Dataset data;
  data.n = static_cast<Eigen::Index>(n);

  std::vector<bool> consumed(table.header.size(), false);
  for (const auto& [prefix, m] : hints.matrix_groups) {
    if (m < 1) throw DataError("matrix group '" + prefix + "' must have at least one column");
    Matrix M(n, m);
    for (int l = 0; l < m; ++l) {
      std::string name = prefix + "_" + std::to_string(l + 1);
      auto it = col_index.find(name);
      if (it == col_index.end()) throw DataError("missing column '" + name + "' of matrix group '" + prefix + "'");
      consumed[it->second] = true;
      for (std::size_t r = 0; r < n; ++r) M(r, l) = parse_double(table.rows[r][it->second], r, name);
    }
    data.matrices.emplace(prefix, std::move(M));
  }

  for (const std::string& name : hints.factors) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw DataError("missing factor column '" + name + "'");
    consumed[it->second] = true;
    FactorColumn fc;
    std::map<std::string, int> seen;
    fc.levels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = table.rows[r][it->second];
      if (cell.empty() || cell == "NA")
        throw DataError("missing value at row " + std::to_string(r + 1) + ", column '" + name + "'");
      auto [lvl, inserted] = seen.emplace(cell, static_cast<int>(fc.labels.size()));
      if (inserted) fc.labels.push_back(cell);
      fc.levels.push_back(lvl->second);
    }
    data.factors.emplace(name, std::move(fc));
  }

  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (consumed[j]) continue;
    Vector v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = parse_double(table.rows[r][j], r, table.header[j]);
    data.scalars.emplace(table.header[j], std::move(v));
  }

  data.validate();
  return data;
}

Dataset ingest_csv(const std::string& path, const SchemaHints& hints) {
  return dataset_from_table(read_csv(path), hints);
}

std::string fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << h;
  return os.str();
}

}  // namespace aqr
