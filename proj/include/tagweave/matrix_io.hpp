#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tagweave/common.hpp"

namespace tagweave {

// TWMX matrix file: magic "TWMX", two little-endian u64 (rows, cols), then
// rows*cols float32 values in row-major order.
namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_matrix(const std::filesystem::path& path,
                        const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  out.write("TWMX", 4);
  detail::write_u64(out, static_cast<std::uint64_t>(m.rows()));
  detail::write_u64(out, static_cast<std::uint64_t>(m.cols()));
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row[static_cast<std::size_t>(j)] = static_cast<float>(m(i, j));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) fail(errc::io, "write failed: " + path.string());
}

inline Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TWMX", 4) != 0)
    fail(errc::parse, "not a TWMX matrix file: " + path.string());
  const std::uint64_t rows = detail::read_u64(in);
  const std::uint64_t cols = detail::read_u64(in);
  if (!in) fail(errc::parse, "truncated TWMX header: " + path.string());
  if (rows > (1ull << 32) || cols > (1ull << 32))
    fail(errc::parse, "implausible TWMX dimensions: " + path.string());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::vector<float> row(static_cast<std::size_t>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) fail(errc::parse, "truncated TWMX payload: " + path.string());
    for (std::uint64_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(row[static_cast<std::size_t>(j)]);
  }
  return m;
}

// Sidecar text files: one entry per line, line number = row/column index.
inline void save_lines(const std::filesystem::path& path,
                       const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (const auto& line : lines) out << line << '\n';
  if (!out) fail(errc::io, "write failed: " + path.string());
}

inline std::vector<std::string> load_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace tagweave
