#pragma once

// Binary matrix interchange: "MTX1", u64 rows, u64 cols (little endian),
// then rows*cols IEEE-754 doubles in row-major order, little endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace sgwinv {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "matrix_io assumes a little-endian host");

inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace detail

inline constexpr std::array<char, 4> kMatrixMagic{'M', 'T', 'X', '1'};

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os.write(kMatrixMagic.data(), kMatrixMagic.size());
  detail::put_u64(os, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64(os, static_cast<std::uint64_t>(m.cols()));
  // Row-major payload: Eigen default storage is column-major.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()),
           static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

inline Eigen::MatrixXd read_matrix(std::istream& is, const std::string& origin = "<stream>") {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMatrixMagic) throw IoError(origin + ": bad magic, expected MTX1");
  const std::uint64_t rows = detail::get_u64(is);
  const std::uint64_t cols = detail::get_u64(is);
  if (!is) throw IoError(origin + ": truncated header");
  if (rows > (1ull << 32) || cols > (1ull << 32)) throw IoError(origin + ": implausible dimensions");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  is.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!is) throw IoError(origin + ": truncated payload");
  return rm;
}

inline void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix(os, m);
  if (!os) throw IoError("write failed: " + path.string());
}

inline Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_matrix(is, path.string());
}

}  // namespace sgwinv
