#include "warpfault/matrix.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "warpfault/errors.hpp"
#include "warpfault/rng.hpp"

namespace warpfault {

namespace {

constexpr std::array<char, 4> kMagic{'W', 'F', 'M', 'X'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw ValidationError("matrix dump truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

}  // namespace

Matrix identity_matrix(std::size_t n, Precision precision) {
  Matrix m(precision, n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = fp::one(precision);
  return m;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Precision precision, std::uint64_t seed,
                     double lo, double hi) {
  Matrix m(precision, rows, cols);
  Rng rng(seed);
  for (auto& w : m.words) w = fp::from_double(lo + (hi - lo) * uniform_unit(rng), precision);
  return m;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kMatrixDumpVersion);
  put_le<std::uint8_t>(out, m.precision == Precision::FP16 ? 16 : 32);
  put_le<std::uint64_t>(out, m.rows);
  put_le<std::uint64_t>(out, m.cols);
  for (Word32 w : m.words) {
    if (m.precision == Precision::FP16) {
      put_le<std::uint16_t>(out, static_cast<std::uint16_t>(w.bits));
    } else {
      put_le<std::uint32_t>(out, w.bits);
    }
  }
}

Matrix read_matrix(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a WFMX matrix dump");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kMatrixDumpVersion) {
    throw ValidationError("unsupported matrix dump version " + std::to_string(version));
  }
  const auto tag = get_le<std::uint8_t>(in);
  if (tag != 16 && tag != 32) throw ValidationError("bad precision tag in matrix dump");
  const auto rows = get_le<std::uint64_t>(in);
  const auto cols = get_le<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1u << 28)) {
    throw ValidationError("matrix dump dimensions out of range");
  }
  Matrix m(tag == 16 ? Precision::FP16 : Precision::FP32, rows, cols);
  for (auto& w : m.words) {
    w.bits = tag == 16 ? get_le<std::uint16_t>(in) : get_le<std::uint32_t>(in);
  }
  return m;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_matrix(out, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_matrix(in);
}

}  // namespace warpfault
