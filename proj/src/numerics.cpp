#include "warpfault/numerics.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "warpfault/errors.hpp"

namespace warpfault {

std::string_view to_string(Precision p) { return p == Precision::FP16 ? "fp16" : "fp32"; }

Precision parse_precision(std::string_view s) {
  if (s == "fp16" || s == "FP16") return Precision::FP16;
  if (s == "fp32" || s == "FP32") return Precision::FP32;
  throw ValidationError("unknown precision '" + std::string(s) + "'");
}

namespace fp {
namespace {

__extension__ typedef unsigned __int128 u128;

struct Format {
  int exp_bits;
  int man_bits;

  constexpr int bias() const { return (1 << (exp_bits - 1)) - 1; }
  constexpr int max_biased() const { return (1 << exp_bits) - 1; }
  constexpr std::uint32_t man_mask() const { return (1u << man_bits) - 1; }
  constexpr std::uint32_t exp_mask() const { return static_cast<std::uint32_t>(max_biased()) << man_bits; }
  constexpr std::uint32_t sign_mask() const { return 1u << (exp_bits + man_bits); }
  constexpr std::uint32_t value_mask() const { return (sign_mask() << 1) - 1; }
  // Exponent of the least significant bit of subnormals and of the smallest normal.
  constexpr int min_quantum() const { return 1 - bias() - man_bits; }
  constexpr std::uint32_t canonical_nan() const {
    return man_bits == 10 ? kCanonicalNanFp16 : kCanonicalNanFp32;
  }
  constexpr std::uint32_t max_finite() const {
    return (static_cast<std::uint32_t>(max_biased() - 1) << man_bits) | man_mask();
  }
};

constexpr Format kFp16{5, 10};
constexpr Format kFp32{8, 23};

constexpr const Format& format_of(Precision p) { return p == Precision::FP16 ? kFp16 : kFp32; }

enum class Kind { Zero, Finite, Inf, NaN };

// value = (-1)^sign * sig * 2^exp, sig an integer (hidden bit included).
struct Unpacked {
  Kind kind;
  bool sign;
  std::uint64_t sig;
  int exp;
};

Unpacked unpack(std::uint32_t raw, const Format& f) {
  raw &= f.value_mask();
  const bool sign = (raw & f.sign_mask()) != 0;
  const int biased = static_cast<int>((raw & f.exp_mask()) >> f.man_bits);
  const std::uint32_t man = raw & f.man_mask();
  if (biased == f.max_biased()) return {man ? Kind::NaN : Kind::Inf, sign, 0, 0};
  if (biased == 0) {
    if (man == 0) return {Kind::Zero, sign, 0, 0};
    return {Kind::Finite, sign, man, f.min_quantum()};
  }
  return {Kind::Finite, sign, man | (1u << f.man_bits), biased - f.bias() - f.man_bits};
}

int bit_length(u128 v) {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  if (hi) return 128 - std::countl_zero(hi);
  return 64 - std::countl_zero(static_cast<std::uint64_t>(v));
}

std::uint32_t signed_zero(bool sign, const Format& f) { return sign ? f.sign_mask() : 0u; }

std::uint32_t overflow(bool sign, const Format& f, RoundingMode rm) {
  const std::uint32_t mag = rm == RoundingMode::TowardZero ? f.max_finite() : f.exp_mask();
  return (sign ? f.sign_mask() : 0u) | mag;
}

// Round the exact nonzero value (-1)^sign * sig * 2^exp into format f.
std::uint32_t round_pack(bool sign, u128 sig, int exp, const Format& f, RoundingMode rm) {
  const int precision = f.man_bits + 1;
  const int top = exp + bit_length(sig) - 1;  // exponent of the leading bit
  int quantum = top - f.man_bits;
  if (quantum < f.min_quantum()) quantum = f.min_quantum();

  u128 kept;
  const int shift = quantum - exp;
  if (shift <= 0) {
    kept = sig << -shift;
  } else {
    u128 rem;
    if (shift >= 128) {
      kept = 0;
      rem = sig;
    } else {
      kept = sig >> shift;
      rem = sig & ((u128{1} << shift) - 1);
    }
    if (rm == RoundingMode::NearestEven) {
      // rem is compared against half an ulp; for shift > 128 half exceeds sig.
      if (shift <= 128) {
        const u128 half = u128{1} << (shift - 1);
        if (rem > half || (rem == half && (kept & 1))) ++kept;
      }
    }
  }

  if (kept == 0) return signed_zero(sign, f);
  if (kept >> precision) {  // carry out of rounding
    kept >>= 1;
    ++quantum;
  }
  std::uint32_t out;
  if (kept >> f.man_bits) {
    const int biased = quantum + f.man_bits + f.bias();
    if (biased >= f.max_biased()) return overflow(sign, f, rm);
    out = (static_cast<std::uint32_t>(biased) << f.man_bits) |
          (static_cast<std::uint32_t>(kept) & f.man_mask());
  } else {
    out = static_cast<std::uint32_t>(kept);  // subnormal, quantum == min_quantum
  }
  return out | (sign ? f.sign_mask() : 0u);
}

std::uint32_t fma_raw(std::uint32_t ra, std::uint32_t rb, std::uint32_t rc, const Format& f,
                      RoundingMode rm) {
  const Unpacked a = unpack(ra, f);
  const Unpacked b = unpack(rb, f);
  const Unpacked c = unpack(rc, f);

  if (a.kind == Kind::NaN || b.kind == Kind::NaN || c.kind == Kind::NaN) return f.canonical_nan();
  const bool psign = a.sign != b.sign;
  const bool a_inf = a.kind == Kind::Inf;
  const bool b_inf = b.kind == Kind::Inf;
  if ((a_inf && b.kind == Kind::Zero) || (b_inf && a.kind == Kind::Zero)) return f.canonical_nan();
  if (a_inf || b_inf) {
    if (c.kind == Kind::Inf && c.sign != psign) return f.canonical_nan();
    return (psign ? f.sign_mask() : 0u) | f.exp_mask();
  }
  if (c.kind == Kind::Inf) return rc & f.value_mask();

  const bool p_zero = a.kind == Kind::Zero || b.kind == Kind::Zero;
  if (p_zero) {
    if (c.kind == Kind::Zero) {
      // Exact zero sum: equal signs keep the sign, otherwise +0 (RNE and RZ).
      return signed_zero(psign && c.sign, f);
    }
    return rc & f.value_mask();
  }

  const u128 psig = static_cast<u128>(a.sig) * b.sig;
  const int pexp = a.exp + b.exp;
  if (c.kind == Kind::Zero) return round_pack(psign, psig, pexp, f, rm);

  // Align the two terms. Within 64 bits of each other the sum is exact;
  // beyond that the lower term is jammed into a sticky bit far below the
  // rounding position.
  u128 hi_sig = psig, lo_sig = c.sig;
  int hi_exp = pexp, lo_exp = c.exp;
  bool hi_sign = psign, lo_sign = c.sign;
  if (lo_exp > hi_exp) {
    std::swap(hi_sig, lo_sig);
    std::swap(hi_exp, lo_exp);
    std::swap(hi_sign, lo_sign);
  }
  const int d = hi_exp - lo_exp;
  int exp;
  if (d <= 64) {
    hi_sig <<= d;
    exp = lo_exp;
  } else {
    hi_sig <<= 64;
    exp = hi_exp - 64;
    const int rshift = exp - lo_exp;
    const bool sticky = rshift >= 128 || (lo_sig & ((u128{1} << rshift) - 1)) != 0;
    lo_sig = rshift >= 128 ? 0 : (lo_sig >> rshift);
    if (sticky) lo_sig |= 1;
  }

  bool sign;
  u128 sum;
  if (hi_sign == lo_sign) {
    sum = hi_sig + lo_sig;
    sign = hi_sign;
  } else if (hi_sig >= lo_sig) {
    sum = hi_sig - lo_sig;
    sign = hi_sign;
  } else {
    sum = lo_sig - hi_sig;
    sign = lo_sign;
  }
  if (sum == 0) return 0u;  // exact cancellation is +0 in RNE and RZ
  return round_pack(sign, sum, exp, f, rm);
}

std::uint32_t low_bits(Word32 w, Precision p) {
  return p == Precision::FP16 ? (w.bits & 0xFFFFu) : w.bits;
}

}  // namespace

Word32 fma(Word32 a, Word32 b, Word32 c, Precision precision, RoundingMode rounding) {
  const Format& f = format_of(precision);
  return {fma_raw(low_bits(a, precision), low_bits(b, precision), low_bits(c, precision), f, rounding)};
}

Word32 mul(Word32 a, Word32 b, Precision precision, RoundingMode rounding) {
  // a * b + (-0) is exactly the rounded product, including the sign of zero.
  return fma(a, b, zero(precision, true), precision, rounding);
}

Word32 add(Word32 a, Word32 b, Precision precision, RoundingMode rounding) {
  return fma(a, one(precision), b, precision, rounding);
}

Word32 convert(Word32 value, Precision from, Precision to, RoundingMode rounding) {
  const Format& ff = format_of(from);
  const Format& tf = format_of(to);
  const Unpacked u = unpack(low_bits(value, from), ff);
  switch (u.kind) {
    case Kind::NaN:
      return {tf.canonical_nan()};
    case Kind::Inf:
      return {(u.sign ? tf.sign_mask() : 0u) | tf.exp_mask()};
    case Kind::Zero:
      return {signed_zero(u.sign, tf)};
    case Kind::Finite:
      break;
  }
  return {round_pack(u.sign, u.sig, u.exp, tf, rounding)};
}

Word32 from_double(double value, Precision precision, RoundingMode rounding) {
  const Format& f = format_of(precision);
  if (std::isnan(value)) return {f.canonical_nan()};
  const bool sign = std::signbit(value);
  if (std::isinf(value)) return {(sign ? f.sign_mask() : 0u) | f.exp_mask()};
  if (value == 0.0) return {signed_zero(sign, f)};
  int e = 0;
  const double m = std::frexp(std::fabs(value), &e);  // m in [0.5, 1)
  const auto sig = static_cast<std::uint64_t>(std::ldexp(m, 53));
  return {round_pack(sign, sig, e - 53, f, rounding)};
}

double to_double(Word32 value, Precision precision) {
  const Format& f = format_of(precision);
  const Unpacked u = unpack(low_bits(value, precision), f);
  switch (u.kind) {
    case Kind::NaN:
      return std::nan("");
    case Kind::Inf:
      return u.sign ? -HUGE_VAL : HUGE_VAL;
    case Kind::Zero:
      return u.sign ? -0.0 : 0.0;
    case Kind::Finite:
      break;
  }
  const double mag = std::ldexp(static_cast<double>(u.sig), u.exp);
  return u.sign ? -mag : mag;
}

bool is_nan(Word32 value, Precision precision) {
  return unpack(low_bits(value, precision), format_of(precision)).kind == Kind::NaN;
}

bool is_inf(Word32 value, Precision precision) {
  return unpack(low_bits(value, precision), format_of(precision)).kind == Kind::Inf;
}

Word32 zero(Precision precision, bool negative) {
  return {negative ? format_of(precision).sign_mask() : 0u};
}

Word32 one(Precision precision) {
  const Format& f = format_of(precision);
  return {static_cast<std::uint32_t>(f.bias()) << f.man_bits};
}

}  // namespace fp

Word32 pack_fp16_pair(std::uint16_t lo, std::uint16_t hi) {
  return {static_cast<std::uint32_t>(lo) | (static_cast<std::uint32_t>(hi) << 16)};
}

std::pair<std::uint16_t, std::uint16_t> unpack_fp16_pair(Word32 w) {
  return {static_cast<std::uint16_t>(w.bits & 0xFFFFu), static_cast<std::uint16_t>(w.bits >> 16)};
}

Word32 flip_bits(Word32 w, std::span<const int> bit_indices) {
  require(!bit_indices.empty() && bit_indices.size() <= 2, "flip_bits takes one or two bit indices");
  std::uint32_t mask = 0;
  for (int bit : bit_indices) {
    require(bit >= 0 && bit < 32, "bit index " + std::to_string(bit) + " outside [0,31]");
    require(!(mask & (1u << bit)), "duplicate bit index " + std::to_string(bit));
    mask |= 1u << bit;
  }
  return {w.bits ^ mask};
}

Word32 flip_bits(Word32 w, std::initializer_list<int> bit_indices) {
  return flip_bits(w, std::span<const int>(bit_indices.begin(), bit_indices.size()));
}

Tile4x4 mma_4x4(const Tile4x4& a, const Tile4x4& b, const Tile4x4& c, Precision out_precision) {
  require(a.precision == Precision::FP16 && b.precision == Precision::FP16,
          "mma_4x4 multiplicands must be FP16");
  require(c.precision == out_precision, "mma_4x4 accumulator precision must match output");
  Tile4x4 d{out_precision, {}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      Word32 acc = out_precision == Precision::FP32
                       ? c.at(i, j)
                       : fp::convert(c.at(i, j), Precision::FP16, Precision::FP32);
      for (std::size_t k = 0; k < 4; ++k) {
        // FP16 x FP16 products are exact in FP32, so one FP32 FMA rounds once per step.
        const Word32 x = fp::convert(a.at(i, k), Precision::FP16, Precision::FP32);
        const Word32 y = fp::convert(b.at(k, j), Precision::FP16, Precision::FP32);
        acc = fp::fma(x, y, acc, Precision::FP32, RoundingMode::TowardZero);
      }
      d.at(i, j) = out_precision == Precision::FP32
                       ? acc
                       : fp::convert(acc, Precision::FP32, Precision::FP16, RoundingMode::TowardZero);
    }
  }
  return d;
}

}  // namespace warpfault
