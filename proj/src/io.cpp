#include "stgdl/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "stgdl/errors.hpp"

namespace stgdl::io {

std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_matrix_csv(const std::filesystem::path& path, const ad::Tensor& m) {
  if (m.rank() != 2) throw ShapeError("write_matrix_csv: expected a matrix, got " + ad::to_string(m.shape()));
  std::string out;
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) {
      if (j) out += ',';
      out += format_real(m.at(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

ad::Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw ParseError(path.string(), line_no, "expected a real number");
      values.push_back(v);
      ++count;
      p = res.ptr;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',') throw ParseError(path.string(), line_no, "expected ','");
      ++p;
    }
    if (rows == 0)
      cols = count;
    else if (count != cols)
      throw ParseError(path.string(), line_no,
                       "row has " + std::to_string(count) + " columns, expected " + std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw ParseError(path.string(), 0, "file is empty");
  return ad::Tensor(ad::Shape{rows, cols}, std::move(values));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace stgdl::io
