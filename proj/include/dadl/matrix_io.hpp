#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dadl/errors.hpp"
#include "dadl/numerics.hpp"

// Matrix file formats:
//   binary: magic "DADL", u32 LE rows, u32 LE cols, rows*cols f64 LE row-major
//   csv:    header line "rows,cols", then one line per row
// save_matrix/load_matrix dispatch on the ".csv" extension.

namespace dadl {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

inline void save_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
  ensure_nonempty(m, "save_matrix_binary");
  ensure_finite(m, "save_matrix_binary");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os.write("DADL", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(m.cols()));
  // x86 doubles are already little-endian IEEE-754.
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      os.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline Matrix load_matrix_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DADL", 4) != 0) {
    throw ConfigError("bad magic in matrix file: " + path.string());
  }
  const std::uint32_t rows = detail::get_u32(is);
  const std::uint32_t cols = detail::get_u32(is);
  if (!is || rows < 1 || cols < 1) throw ConfigError("bad header in matrix file: " + path.string());
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  }
  if (!is) throw ConfigError("truncated matrix file: " + path.string());
  if (!m.allFinite()) throw ConfigError("non-finite entries in matrix file: " + path.string());
  return m;
}

inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  ensure_nonempty(m, "save_matrix_csv");
  ensure_finite(m, "save_matrix_csv");
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os << m.rows() << "," << m.cols() << "\n";
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      os << buf << (j + 1 == m.cols() ? '\n' : ',');
    }
  }
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty csv matrix file: " + path.string());
  long rows = 0, cols = 0;
  char comma = 0;
  std::istringstream hdr(line);
  if (!(hdr >> rows >> comma >> cols) || comma != ',' || rows < 1 || cols < 1) {
    throw ConfigError("bad csv header in: " + path.string());
  }
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw ConfigError("truncated csv matrix file: " + path.string());
    std::istringstream ls(line);
    std::string cell;
    for (long j = 0; j < cols; ++j) {
      if (!std::getline(ls, cell, ',')) throw ConfigError("short csv row in: " + path.string());
      try {
        m(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("bad csv value '" + cell + "' in: " + path.string());
      }
    }
  }
  if (!m.allFinite()) throw ConfigError("non-finite entries in matrix file: " + path.string());
  return m;
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (path.extension() == ".csv") {
    save_matrix_csv(path, m);
  } else {
    save_matrix_binary(path, m);
  }
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? load_matrix_csv(path) : load_matrix_binary(path);
}

inline void save_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os << "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) os << i << "," << labels[i] << "\n";
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline std::vector<int> load_labels_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("index,label", 0) != 0) {
    throw ConfigError("bad labels csv header in: " + path.string());
  }
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("bad labels csv row in: " + path.string());
    try {
      labels.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad label value in: " + path.string());
    }
  }
  if (labels.empty()) throw ConfigError("no labels in: " + path.string());
  return labels;
}

}  // namespace dadl
