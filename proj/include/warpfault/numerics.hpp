#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <utility>

namespace warpfault {

enum class Precision : std::uint8_t { FP16, FP32 };
enum class RoundingMode : std::uint8_t { NearestEven, TowardZero };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

/// Raw 32-bit register content. Holds one FP32 value, one FP16 value in the
/// low half, or a packed FP16 pair (low half = first result, high = second).
struct Word32 {
  std::uint32_t bits = 0;
  constexpr auto operator<=>(const Word32&) const = default;
};

inline constexpr std::uint32_t kCanonicalNanFp32 = 0x7FFFFFFFu;
inline constexpr std::uint32_t kCanonicalNanFp16 = 0x7FFFu;

/// Software IEEE 754 binary16/binary32 arithmetic. Every function is
/// bit-exact and independent of the host FPU state. NaN results are always
/// the canonical NaN of the target format.
namespace fp {

/// round(a * b + c) with a single rounding. FP16 operands live in the low
/// 16 bits of their word; the high bits are ignored.
Word32 fma(Word32 a, Word32 b, Word32 c, Precision precision, RoundingMode rounding);

Word32 mul(Word32 a, Word32 b, Precision precision, RoundingMode rounding = RoundingMode::NearestEven);
Word32 add(Word32 a, Word32 b, Precision precision, RoundingMode rounding = RoundingMode::NearestEven);

/// Format conversion. Widening FP16 -> FP32 is exact.
Word32 convert(Word32 value, Precision from, Precision to,
               RoundingMode rounding = RoundingMode::NearestEven);

Word32 from_double(double value, Precision precision,
                   RoundingMode rounding = RoundingMode::NearestEven);
double to_double(Word32 value, Precision precision);

bool is_nan(Word32 value, Precision precision);
bool is_inf(Word32 value, Precision precision);

Word32 zero(Precision precision, bool negative = false);
Word32 one(Precision precision);

}  // namespace fp

Word32 pack_fp16_pair(std::uint16_t lo, std::uint16_t hi);
std::pair<std::uint16_t, std::uint16_t> unpack_fp16_pair(Word32 w);

/// XOR the given bit positions. Accepts one or two distinct indices in [0, 31].
Word32 flip_bits(Word32 w, std::span<const int> bit_indices);
Word32 flip_bits(Word32 w, std::initializer_list<int> bit_indices);

struct Tile4x4 {
  Precision precision = Precision::FP16;
  std::array<Word32, 16> values{};

  Word32& at(std::size_t row, std::size_t col) { return values[row * 4 + col]; }
  Word32 at(std::size_t row, std::size_t col) const { return values[row * 4 + col]; }
};

/// Tensor-core multiply-accumulate: D = A * B + C. A and B are FP16; each
/// product is exact, the running sum is kept in FP32 and rounded toward zero
/// after every step (k = 0..3 ascending), then rounded toward zero to
/// `out_precision`. C must already be in `out_precision`.
Tile4x4 mma_4x4(const Tile4x4& a, const Tile4x4& b, const Tile4x4& c, Precision out_precision);

}  // namespace warpfault
