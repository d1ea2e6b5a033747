#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cood/datagen.hpp"

namespace cood {

std::string_view to_string(CsvErrorKind kind) {
  switch (kind) {
    case CsvErrorKind::empty_file: return "empty-file";
    case CsvErrorKind::missing_header: return "missing-header";
    case CsvErrorKind::non_numeric: return "non-numeric";
    case CsvErrorKind::ragged_row: return "ragged-row";
    case CsvErrorKind::io: return "io";
  }
  return "unknown";
}

namespace {

std::string describe(CsvErrorKind kind, std::size_t line, std::size_t column, const std::string& detail) {
  std::ostringstream os;
  os << "csv " << to_string(kind);
  if (line) os << " at line " << line;
  if (column) os << " column " << column;
  if (!detail.empty()) os << ": " << detail;
  return os.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

CsvError::CsvError(CsvErrorKind kind, std::size_t line, std::size_t column, const std::string& detail)
    : DataError(describe(kind, line, column, detail)), kind_(kind), line_(line), column_(column) {}

LabeledDataset parse_features_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw CsvError(CsvErrorKind::empty_file, 0, 0, "no content");

  const auto header = split_fields(lines.front());
  if (header.size() < 2 || header.front() != "label") {
    throw CsvError(CsvErrorKind::missing_header, 1, 1, "expected 'label,f0,f1,...'");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 1)) {
      throw CsvError(CsvErrorKind::missing_header, 1, j + 1,
                     "expected column name f" + std::to_string(j - 1));
    }
  }
  const std::size_t d = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<long long> names;
  std::map<long long, int> remap;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw CsvError(CsvErrorKind::ragged_row, line_no, std::min(fields.size(), header.size()) + 1,
                     "expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    }
    long long raw = 0;
    {
      const auto f = fields[0];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), raw);
      if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size()) {
        throw CsvError(CsvErrorKind::non_numeric, line_no, 1, "label '" + std::string(f) + "'");
      }
    }
    auto [it, inserted] = remap.try_emplace(raw, static_cast<int>(names.size()));
    if (inserted) names.push_back(raw);
    labels.push_back(it->second);

    for (std::size_t j = 0; j < d; ++j) {
      auto f = fields[j + 1];
      double v = 0.0;
      const char* first = f.data();
      if (!f.empty() && f.front() == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), v);
      if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw CsvError(CsvErrorKind::non_numeric, line_no, j + 2, "value '" + std::string(f) + "'");
      }
      values.push_back(v);
    }
  }

  const std::size_t n = labels.size();
  LabeledDataset ds(Matrix(n, d, std::move(values)), std::move(labels), names.size());
  ds.set_label_names(std::move(names));
  return ds;
}

LabeledDataset load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvErrorKind::io, 0, 0, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_features_csv(buf.str());
}

std::string format_features_csv(const LabeledDataset& ds) {
  std::string out = "label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out += std::to_string(ds.label_names()[static_cast<std::size_t>(ds.labels()[r])]);
    for (double v : ds.inputs().row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_features_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError(CsvErrorKind::io, 0, 0, "cannot write " + path.string());
  out << format_features_csv(ds);
}

}  // namespace cood
