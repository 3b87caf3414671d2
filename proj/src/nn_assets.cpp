#include <bit>
#include <cmath>

#include "warpfault/errors.hpp"
#include "warpfault/nn.hpp"
#include "warpfault/rng.hpp"

namespace warpfault::nn {

namespace {

// Uniform in [-a, a) with a = gain * sqrt(3 / fan_in), i.e. variance gain^2 / fan_in.
std::vector<float> init_weights(Rng& rng, std::size_t count, std::size_t fan_in, double gain) {
  const double a = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<float> w(count);
  for (float& v : w) v = static_cast<float>((2.0 * uniform_unit(rng) - 1.0) * a);
  return w;
}

Conv make_conv(Rng& rng, std::size_t out, std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
               double gain) {
  Conv c;
  c.out_channels = out;
  c.in_channels = in;
  c.kernel_h = c.kernel_w = k;
  c.stride = stride;
  c.pad = pad;
  c.weights = init_weights(rng, out * in * k * k, in * k * k, gain);
  return c;
}

}  // namespace

NetworkSpec reference_network(std::uint64_t seed) {
  Rng rng(mix64(seed));
  const DetectionHead head{};
  const double relu_gain = std::sqrt(2.0 / (1.0 + 0.01));
  NetworkSpec net;
  net.layers.emplace_back(make_conv(rng, 8, 3, 3, 2, 1, relu_gain));
  net.layers.emplace_back(LeakyRelu{});
  net.layers.emplace_back(make_conv(rng, 16, 8, 3, 2, 1, relu_gain));
  net.layers.emplace_back(LeakyRelu{});
  net.layers.emplace_back(make_conv(rng, 16, 16, 1, 1, 0, relu_gain));
  net.layers.emplace_back(LeakyRelu{});
  net.layers.emplace_back(make_conv(rng, head.boxes * (5 + head.classes), 16, 1, 1, 0, kHeadGain));
  net.layers.emplace_back(head);
  validate(net);
  return net;
}

std::vector<Tensor> reference_frames(std::size_t count, std::uint64_t seed) {
  const NetworkSpec shape;
  std::vector<Tensor> frames;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    Rng rng(derive_seed(seed, "frame", f));
    std::vector<double> px(shape.in_channels * shape.in_height * shape.in_width);
    auto idx = [&](std::size_t c, std::size_t y, std::size_t x) { return (c * shape.in_height + y) * shape.in_width + x; };
    // Shaded background: per-channel base level plus a linear ramp.
    for (std::size_t c = 0; c < shape.in_channels; ++c) {
      const double base = 0.1 + 0.3 * uniform_unit(rng);
      const double gx = 0.2 * (uniform_unit(rng) - 0.5), gy = 0.2 * (uniform_unit(rng) - 0.5);
      for (std::size_t y = 0; y < shape.in_height; ++y) {
        for (std::size_t x = 0; x < shape.in_width; ++x) {
          px[idx(c, y, x)] = base + gx * static_cast<double>(x) / static_cast<double>(shape.in_width) +
                             gy * static_cast<double>(y) / static_cast<double>(shape.in_height);
        }
      }
    }
    const std::size_t objects = 2 + uniform_below(rng, 3);
    for (std::size_t o = 0; o < objects; ++o) {
      const std::size_t h = 4 + uniform_below(rng, 11), w = 4 + uniform_below(rng, 11);
      const std::size_t y0 = uniform_below(rng, shape.in_height - h + 1);
      const std::size_t x0 = uniform_below(rng, shape.in_width - w + 1);
      double colour[3];
      for (double& v : colour) v = uniform_unit(rng);
      for (std::size_t c = 0; c < shape.in_channels; ++c) {
        for (std::size_t y = y0; y < y0 + h; ++y) {
          for (std::size_t x = x0; x < x0 + w; ++x) px[idx(c, y, x)] = colour[c % 3];
        }
      }
    }
    Tensor t(Precision::FP32, shape.in_channels, shape.in_height, shape.in_width);
    for (std::size_t i = 0; i < px.size(); ++i) {
      t.data[i] = Word32{std::bit_cast<std::uint32_t>(static_cast<float>(px[i]))};
    }
    frames.push_back(std::move(t));
  }
  return frames;
}

void save_frame(const std::filesystem::path& path, const Tensor& frame) { save_matrix(path, frame.as_matrix()); }

Tensor load_frame(const std::filesystem::path& path, std::size_t height, std::size_t width) {
  const Matrix m = load_matrix(path);
  if (m.cols != height * width) throw ValidationError(path.string() + ": frame size does not match the network input");
  return Tensor::from_matrix(m, height, width);
}

}  // namespace warpfault::nn
