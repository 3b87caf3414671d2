#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "warpfault/numerics.hpp"

namespace warpfault {

struct Coord {
  std::size_t row = 0;
  std::size_t col = 0;
  constexpr auto operator<=>(const Coord&) const = default;
};

/// Row-major matrix of register words. FP16 elements occupy the low 16 bits.
struct Matrix {
  Precision precision = Precision::FP32;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Word32> words;

  Matrix() = default;
  Matrix(Precision p, std::size_t r, std::size_t c) : precision(p), rows(r), cols(c), words(r * c) {}

  Word32& at(std::size_t r, std::size_t c) { return words[r * cols + c]; }
  Word32 at(std::size_t r, std::size_t c) const { return words[r * cols + c]; }
  double value(std::size_t r, std::size_t c) const { return fp::to_double(at(r, c), precision); }

  bool operator==(const Matrix&) const = default;
};

Matrix identity_matrix(std::size_t n, Precision precision);

/// Uniform values in [lo, hi), rounded to the matrix precision.
Matrix random_matrix(std::size_t rows, std::size_t cols, Precision precision, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0);

// Matrix dump: little-endian header {"WFMX", u16 version, u8 precision,
// u64 rows, u64 cols} then row-major elements, 2 bytes each for FP16 and
// 4 bytes each for FP32.
inline constexpr std::uint16_t kMatrixDumpVersion = 1;

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace warpfault
