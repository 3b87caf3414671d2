#include "mpfr_oracle.hpp"

#include <mpfr.h>

#include <cmath>

namespace oracle {

namespace {

struct Spec {
  int exp_bits, man_bits;
  int bias() const { return (1 << (exp_bits - 1)) - 1; }
  int precision() const { return man_bits + 1; }
  // MPFR keeps the significand in [0.5, 1), one exponent step above IEEE.
  mpfr_exp_t emax() const { return bias() + 1; }
  mpfr_exp_t emin() const { return 1 - bias() - man_bits + 1; }
};

Spec spec(Format f) { return f == Format::Half ? Spec{5, 10} : Spec{8, 23}; }

mpfr_rnd_t mode(Round r) { return r == Round::NearestEven ? MPFR_RNDN : MPFR_RNDZ; }

constexpr mpfr_prec_t kWide = 600;

class Num {
 public:
  Num(mpfr_prec_t p = kWide) { mpfr_init2(v, p); }
  ~Num() { mpfr_clear(v); }
  Num(const Num&) = delete;
  Num& operator=(const Num&) = delete;
  mpfr_t v;
};

void decode(mpfr_t out, std::uint32_t bits, Format f) {
  const Spec s = spec(f);
  const std::uint32_t man_mask = (1u << s.man_bits) - 1;
  const std::uint32_t exp_mask = (1u << s.exp_bits) - 1;
  const bool neg = (bits >> (s.exp_bits + s.man_bits)) & 1;
  const std::uint32_t e = (bits >> s.man_bits) & exp_mask;
  const std::uint32_t m = bits & man_mask;
  if (e == exp_mask) {
    if (m != 0) {
      mpfr_set_nan(out);
    } else {
      mpfr_set_inf(out, neg ? -1 : 1);
    }
    return;
  }
  if (e == 0 && m == 0) {
    mpfr_set_zero(out, neg ? -1 : 1);
    return;
  }
  // value = sig * 2^(exp - man_bits)
  const std::uint32_t sig = e == 0 ? m : (m | (1u << s.man_bits));
  const long exp = (e == 0 ? 1 : static_cast<long>(e)) - s.bias() - s.man_bits;
  mpfr_set_ui_2exp(out, sig, exp, MPFR_RNDN);
  if (neg) mpfr_neg(out, out, MPFR_RNDN);
}

// `value` must already be representable in `f` (after round_to).
std::uint32_t encode(const mpfr_t value, Format f) {
  const Spec s = spec(f);
  const std::uint32_t sign = mpfr_signbit(value) ? 1u << (s.exp_bits + s.man_bits) : 0u;
  const std::uint32_t exp_all = ((1u << s.exp_bits) - 1) << s.man_bits;
  if (mpfr_inf_p(value)) return sign | exp_all;
  if (mpfr_zero_p(value)) return sign;
  Num mag(kWide);
  mpfr_abs(mag.v, value, MPFR_RNDN);
  // Smallest normal is 2^(1 - bias).
  long e2 = 0;
  mpfr_get_d_2exp(&e2, mag.v, MPFR_RNDN);  // mag = d * 2^e2, d in [0.5, 1)
  const long unbiased = e2 - 1;
  if (unbiased < 1 - s.bias()) {
    // Subnormal: field = value / 2^(1 - bias - man_bits)
    mpfr_mul_2si(mag.v, mag.v, s.bias() - 1 + s.man_bits, MPFR_RNDN);
    return sign | static_cast<std::uint32_t>(mpfr_get_ui(mag.v, MPFR_RNDN));
  }
  mpfr_mul_2si(mag.v, mag.v, s.man_bits - unbiased, MPFR_RNDN);
  const auto sig = static_cast<std::uint32_t>(mpfr_get_ui(mag.v, MPFR_RNDN));
  const auto field = static_cast<std::uint32_t>(unbiased + s.bias());
  return sign | (field << s.man_bits) | (sig & ((1u << s.man_bits) - 1));
}

// Rounds an exact value into format f with subnormals and overflow handling.
std::optional<std::uint32_t> round_to(const mpfr_t exact, Format f, Round r) {
  if (mpfr_nan_p(exact)) return std::nullopt;
  const Spec s = spec(f);
  const mpfr_exp_t old_min = mpfr_get_emin(), old_max = mpfr_get_emax();
  Num out(s.precision());
  mpfr_set_emin(s.emin());
  mpfr_set_emax(s.emax());
  int t = mpfr_set(out.v, exact, mode(r));
  t = mpfr_check_range(out.v, t, mode(r));
  mpfr_subnormalize(out.v, t, mode(r));
  mpfr_set_emin(old_min);
  mpfr_set_emax(old_max);
  return encode(out.v, f);
}

}  // namespace

std::optional<std::uint32_t> fma(std::uint32_t a, std::uint32_t b, std::uint32_t c, Format f, Round r) {
  Num x, y, z, exact;
  decode(x.v, a, f);
  decode(y.v, b, f);
  decode(z.v, c, f);
  // 600 bits cover every binary32 exponent span, so this is exact.
  mpfr_fma(exact.v, x.v, y.v, z.v, mode(r));
  return round_to(exact.v, f, r);
}

std::optional<std::uint32_t> convert(std::uint32_t bits, Format from, Format to, Round r) {
  Num x;
  decode(x.v, bits, from);
  return round_to(x.v, to, r);
}

std::optional<std::uint32_t> mma_element(const std::uint32_t a_row[4], const std::uint32_t b_col[4], std::uint32_t c,
                                         Format out) {
  std::optional<std::uint32_t> acc = out == Format::Single ? std::optional(c) : convert(c, Format::Half, Format::Single,
                                                                                         Round::TowardZero);
  for (int k = 0; k < 4 && acc; ++k) {
    const auto x = convert(a_row[k], Format::Half, Format::Single, Round::NearestEven);
    const auto y = convert(b_col[k], Format::Half, Format::Single, Round::NearestEven);
    if (!x || !y) return std::nullopt;
    acc = fma(*x, *y, *acc, Format::Single, Round::TowardZero);
  }
  if (!acc) return std::nullopt;
  return out == Format::Single ? acc : convert(*acc, Format::Single, Format::Half, Round::TowardZero);
}

double to_double(std::uint32_t bits, Format f) {
  Num x;
  decode(x.v, bits, f);
  return mpfr_get_d(x.v, MPFR_RNDN);
}

}  // namespace oracle
