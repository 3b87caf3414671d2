#pragma once
// Direct convolution on the MPFR reference arithmetic, no im2col involved.

#include <cstdint>

#include "oracle/mpfr_oracle.hpp"
#include "warpfault/matrix.hpp"
#include "warpfault/nn.hpp"

namespace oracle {

// Direct convolution: out[o][y][x] accumulates w * in over (c, ky, kx) with
// one round-to-nearest FMA per tap; taps outside the image contribute w * 0.
inline warpfault::Matrix direct_conv(const warpfault::nn::Tensor& in, const warpfault::Matrix& weights,
                                     std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  const Format f = in.precision == warpfault::Precision::FP16 ? Format::Half : Format::Single;
  const std::size_t oh = (in.height + 2 * pad - kh) / stride + 1, ow = (in.width + 2 * pad - kw) / stride + 1;
  warpfault::Matrix out(in.precision, weights.rows, oh * ow);
  for (std::size_t o = 0; o < weights.rows; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::uint32_t acc = 0;
        for (std::size_t c = 0; c < in.channels; ++c) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(in.height) &&
                                  ix < static_cast<long>(in.width);
              const std::uint32_t v = inside ? in.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)).bits : 0;
              acc = *fma(weights.at(o, (c * kh + ky) * kw + kx).bits, v, acc, f, Round::NearestEven);
            }
          }
        }
        out.at(o, y * ow + x).bits = acc;
      }
    }
  }
  return out;
}

}  // namespace oracle
