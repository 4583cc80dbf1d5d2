#include "lazyla/interop.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lazyla {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <Scalar T>
T parse_field(std::string_view field, std::size_t line, std::size_t column) {
  std::string_view f = trim(field);
  if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = trim(f.substr(1, f.size() - 2));
  if (!f.empty() && f.front() == '+') f.remove_prefix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
    throw ParseError("line " + std::to_string(line) + ", field " + std::to_string(column) + ": '" +
                         std::string(field) + "' is not a number",
                     line);
  }
  return v;
}

}  // namespace

template <Scalar T>
void csv_write(std::ostream& os, const HostMatrix<T>& h) {
  const char* fmt = sizeof(T) == 8 ? "%.17g" : "%.9g";
  char buf[40];
  for (std::size_t i = 0; i < h.dims.rows; ++i) {
    for (std::size_t j = 0; j < h.dims.cols; ++j) {
      if (j != 0) os << ',';
      std::snprintf(buf, sizeof buf, fmt, static_cast<double>(h(i, j)));
      os << buf;
    }
    os << '\n';
  }
}

template <Scalar T>
HostMatrix<T> csv_parse(std::string_view text) {
  std::vector<std::vector<T>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (trim(line).empty()) {
      // Blank lines are only allowed at the end.
      if (trim(text).empty()) break;
      throw ParseError("line " + std::to_string(line_no) + " is empty", line_no);
    }
    std::vector<T> row;
    std::size_t column = 1;
    for (;;) {
      const std::size_t comma = line.find(',');
      row.push_back(parse_field<T>(line.substr(0, comma), line_no, column++));
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                           " fields, expected " + std::to_string(rows.front().size()),
                       line_no);
    }
    rows.push_back(std::move(row));
  }
  HostMatrix<T> h(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) h(i, j) = rows[i][j];
  }
  return h;
}

template <Scalar T>
void csv_save(const HostMatrix<T>& h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigurationError("cannot open " + path.string() + " for writing");
  csv_write(out, h);
  if (!out) throw ConfigurationError("write to " + path.string() + " failed");
}

template <Scalar T>
HostMatrix<T> csv_load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return csv_parse<T>(ss.str());
}

template void csv_write<float>(std::ostream&, const HostMatrix<float>&);
template void csv_write<double>(std::ostream&, const HostMatrix<double>&);
template HostMatrix<float> csv_parse<float>(std::string_view);
template HostMatrix<double> csv_parse<double>(std::string_view);
template void csv_save<float>(const HostMatrix<float>&, const std::filesystem::path&);
template void csv_save<double>(const HostMatrix<double>&, const std::filesystem::path&);
template HostMatrix<float> csv_load<float>(const std::filesystem::path&);
template HostMatrix<double> csv_load<double>(const std::filesystem::path&);

}  // namespace lazyla
