#include "warpfault/nn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "warpfault/errors.hpp"

namespace warpfault::nn {

Matrix Tensor::as_matrix() const {
  Matrix m(precision, channels, height * width);
  m.words = data;
  return m;
}

Tensor Tensor::from_matrix(const Matrix& m, std::size_t height, std::size_t width) {
  require(m.cols == height * width, "tensor shape does not match matrix columns");
  Tensor t(m.precision, m.rows, height, width);
  t.data = m.words;
  return t;
}

Tensor Tensor::converted(Precision to) const {
  Tensor t(to, channels, height, width);
  for (std::size_t i = 0; i < data.size(); ++i) t.data[i] = fp::convert(data[i], precision, to);
  return t;
}

const DetectionHead& NetworkSpec::head() const {
  require(!layers.empty() && std::holds_alternative<DetectionHead>(layers.back()),
          "network must end in a detection head");
  return std::get<DetectionHead>(layers.back());
}

std::size_t NetworkSpec::gemm_layers() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const Layer& l) {
    return std::holds_alternative<Conv>(l) || std::holds_alternative<Dense>(l);
  }));
}

namespace {

struct Shape {
  std::size_t c, h, w;
};

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

Shape output_shape(const Layer& layer, Shape in) {
  if (const auto* conv = std::get_if<Conv>(&layer)) {
    return {conv->out_channels, conv_out(in.h, conv->kernel_h, conv->stride, conv->pad),
            conv_out(in.w, conv->kernel_w, conv->stride, conv->pad)};
  }
  if (const auto* dense = std::get_if<Dense>(&layer)) return {dense->out_features, 1, 1};
  return in;
}

}  // namespace

void validate(const NetworkSpec& net) {
  if (net.in_channels == 0 || net.in_height == 0 || net.in_width == 0) throw ValidationError("empty input shape");
  if (net.layers.empty() || !std::holds_alternative<DetectionHead>(net.layers.back())) {
    throw ValidationError("network must end in a detection head");
  }
  Shape s{net.in_channels, net.in_height, net.in_width};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (const auto* conv = std::get_if<Conv>(&layer)) {
      if (conv->in_channels != s.c) throw ValidationError(where + "input channel mismatch");
      if (conv->stride == 0 || conv->kernel_h == 0 || conv->kernel_w == 0 || conv->out_channels == 0) {
        throw ValidationError(where + "degenerate convolution");
      }
      if (conv->kernel_h > s.h + 2 * conv->pad || conv->kernel_w > s.w + 2 * conv->pad) {
        throw ValidationError(where + "kernel larger than padded input");
      }
      if (conv->weights.size() != conv->out_channels * conv->in_channels * conv->kernel_h * conv->kernel_w) {
        throw ValidationError(where + "weight count mismatch");
      }
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      if (dense->in_features != s.c * s.h * s.w) throw ValidationError(where + "input feature mismatch");
      if (dense->weights.size() != dense->out_features * dense->in_features || dense->out_features == 0) {
        throw ValidationError(where + "weight count mismatch");
      }
    } else if (const auto* head = std::get_if<DetectionHead>(&layer)) {
      if (i + 1 != net.layers.size()) throw ValidationError(where + "detection head must be last");
      if (s.c != head->boxes * (5 + head->classes) || s.h != head->grid || s.w != head->grid) {
        throw ValidationError(where + "detection head does not match the raw output shape");
      }
    }
    s = output_shape(layer, s);
  }
}

// ---- weight file -----------------------------------------------------------

namespace {

constexpr std::array<char, 4> kNetMagic{'W', 'F', 'N', 'N'};
enum class RecordKind : std::uint8_t { Input = 0, Conv = 1, Dense = 2, LeakyRelu = 3, DetectionHead = 4 };

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw ValidationError("weight file truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_dim(std::ostream& out, std::size_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

std::size_t get_dim(std::istream& in) {
  const std::uint32_t v = get_u32(in);
  if (v > (1u << 20)) throw ValidationError("implausible layer dimension in weight file");
  return v;
}

void put_weights(std::ostream& out, const std::vector<float>& w) {
  for (float f : w) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> get_weights(std::istream& in, std::size_t count) {
  if (count > (1u << 26)) throw ValidationError("implausible weight count");
  std::vector<float> w(count);
  for (float& f : w) f = std::bit_cast<float>(get_u32(in));
  return w;
}

}  // namespace

void write_network(std::ostream& out, const NetworkSpec& net) {
  validate(net);
  out.write(kNetMagic.data(), kNetMagic.size());
  const std::array<char, 2> version{static_cast<char>(kWeightFileVersion & 0xFF),
                                    static_cast<char>(kWeightFileVersion >> 8)};
  out.write(version.data(), 2);
  put_dim(out, net.layers.size() + 1);
  out.put(static_cast<char>(RecordKind::Input));
  put_dim(out, net.in_channels);
  put_dim(out, net.in_height);
  put_dim(out, net.in_width);
  for (const Layer& layer : net.layers) {
    if (const auto* conv = std::get_if<Conv>(&layer)) {
      out.put(static_cast<char>(RecordKind::Conv));
      for (std::size_t v : {conv->out_channels, conv->in_channels, conv->kernel_h, conv->kernel_w, conv->stride,
                            conv->pad}) {
        put_dim(out, v);
      }
      put_weights(out, conv->weights);
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      out.put(static_cast<char>(RecordKind::Dense));
      put_dim(out, dense->out_features);
      put_dim(out, dense->in_features);
      put_weights(out, dense->weights);
    } else if (const auto* act = std::get_if<LeakyRelu>(&layer)) {
      out.put(static_cast<char>(RecordKind::LeakyRelu));
      put_u32(out, std::bit_cast<std::uint32_t>(act->slope));
    } else {
      const auto& head = std::get<DetectionHead>(layer);
      out.put(static_cast<char>(RecordKind::DetectionHead));
      put_dim(out, head.grid);
      put_dim(out, head.boxes);
      put_dim(out, head.classes);
    }
  }
}

NetworkSpec read_network(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kNetMagic) throw ValidationError("not a WFNN weight file");
  std::array<unsigned char, 2> version{};
  in.read(reinterpret_cast<char*>(version.data()), 2);
  if (!in || (version[0] | (version[1] << 8)) != kWeightFileVersion) {
    throw ValidationError("unsupported weight file version");
  }
  const std::size_t records = get_dim(in);
  NetworkSpec net;
  for (std::size_t r = 0; r < records; ++r) {
    const int kind = in.get();
    if (!in) throw ValidationError("weight file truncated");
    if (r == 0 && kind != static_cast<int>(RecordKind::Input)) throw ValidationError("weight file must start with an input record");
    switch (static_cast<RecordKind>(kind)) {
      case RecordKind::Input:
        if (r != 0) throw ValidationError("duplicate input record");
        net.in_channels = get_dim(in);
        net.in_height = get_dim(in);
        net.in_width = get_dim(in);
        break;
      case RecordKind::Conv: {
        Conv c;
        c.out_channels = get_dim(in);
        c.in_channels = get_dim(in);
        c.kernel_h = get_dim(in);
        c.kernel_w = get_dim(in);
        c.stride = get_dim(in);
        c.pad = get_dim(in);
        c.weights = get_weights(in, c.out_channels * c.in_channels * c.kernel_h * c.kernel_w);
        net.layers.emplace_back(std::move(c));
        break;
      }
      case RecordKind::Dense: {
        Dense d;
        d.out_features = get_dim(in);
        d.in_features = get_dim(in);
        d.weights = get_weights(in, d.out_features * d.in_features);
        net.layers.emplace_back(std::move(d));
        break;
      }
      case RecordKind::LeakyRelu:
        net.layers.emplace_back(LeakyRelu{std::bit_cast<float>(get_u32(in))});
        break;
      case RecordKind::DetectionHead: {
        DetectionHead h;
        h.grid = get_dim(in);
        h.boxes = get_dim(in);
        h.classes = get_dim(in);
        net.layers.emplace_back(h);
        break;
      }
      default:
        throw ValidationError("unknown layer record kind " + std::to_string(kind));
    }
  }
  validate(net);
  return net;
}

void save_network(const std::filesystem::path& path, const NetworkSpec& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_network(out, net);
}

NetworkSpec load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_network(in);
}

// ---- lowering --------------------------------------------------------------

Matrix im2col(const Tensor& input, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
              std::size_t pad) {
  require(kernel_h > 0 && kernel_w > 0 && stride > 0, "im2col: degenerate kernel or stride");
  require(kernel_h <= input.height + 2 * pad && kernel_w <= input.width + 2 * pad,
          "im2col: kernel does not fit the input");
  const std::size_t out_h = conv_out(input.height, kernel_h, stride, pad);
  const std::size_t out_w = conv_out(input.width, kernel_w, stride, pad);
  Matrix m(input.precision, input.channels * kernel_h * kernel_w, out_h * out_w);
  for (std::size_t c = 0; c < input.channels; ++c) {
    for (std::size_t ky = 0; ky < kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < kernel_w; ++kx) {
        const std::size_t row = (c * kernel_h + ky) * kernel_w + kx;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t y = oy * stride + ky, x = ox * stride + kx;
            const bool inside = y >= pad && x >= pad && y - pad < input.height && x - pad < input.width;
            m.at(row, oy * out_w + ox) = inside ? input.at(c, y - pad, x - pad) : fp::zero(input.precision);
          }
        }
      }
    }
  }
  return m;
}

// ---- detections ------------------------------------------------------------

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

nlohmann::json detections_to_json(const std::vector<Detection>& detections) {
  nlohmann::json out = nlohmann::json::array();
  for (const Detection& d : detections) {
    out.push_back({{"x", d.x}, {"y", d.y}, {"w", d.w}, {"h", d.h}, {"class", d.class_id},
                   {"confidence", d.confidence}, {"cell", d.cell}, {"box", d.box}});
  }
  return out;
}

double iou(const Detection& a, const Detection& b) {
  const double ax0 = a.x - a.w / 2, ax1 = a.x + a.w / 2, ay0 = a.y - a.h / 2, ay1 = a.y + a.h / 2;
  const double bx0 = b.x - b.w / 2, bx1 = b.x + b.w / 2, by0 = b.y - b.h / 2, by1 = b.y + b.h / 2;
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (!(uni > 0.0)) return 0.0;  // also catches NaN geometry
  return inter / uni;
}

std::vector<Detection> decode_detections(const Tensor& raw, const DetectionHead& head, double conf_threshold,
                                         double nms_iou) {
  const std::size_t stride = 5 + head.classes;
  require(raw.channels == head.boxes * stride && raw.height == head.grid && raw.width == head.grid,
          "decode_detections: raw tensor does not match the head");
  const double g = static_cast<double>(head.grid);
  std::vector<Detection> candidates;
  for (std::size_t gy = 0; gy < head.grid; ++gy) {
    for (std::size_t gx = 0; gx < head.grid; ++gx) {
      for (std::size_t b = 0; b < head.boxes; ++b) {
        const std::size_t base = b * stride;
        const double conf = sigmoid(raw.value(base + 4, gy, gx));
        if (!(conf >= conf_threshold)) continue;
        Detection d;
        d.cell = gy * head.grid + gx;
        d.box = b;
        d.confidence = conf;
        const double anchor = 0.25 * static_cast<double>(b + 1);
        d.x = (static_cast<double>(gx) + sigmoid(raw.value(base + 0, gy, gx))) / g;
        d.y = (static_cast<double>(gy) + sigmoid(raw.value(base + 1, gy, gx))) / g;
        d.w = anchor * sigmoid(raw.value(base + 2, gy, gx));
        d.h = anchor * sigmoid(raw.value(base + 3, gy, gx));
        double best = raw.value(base + 5, gy, gx);
        for (std::size_t c = 1; c < head.classes; ++c) {
          const double v = raw.value(base + 5 + c, gy, gx);
          if (v > best || (std::isnan(best) && !std::isnan(v))) {
            best = v;
            d.class_id = static_cast<int>(c);
          }
        }
        candidates.push_back(d);
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.cell != b.cell) return a.cell < b.cell;
    return a.box < b.box;
  });
  std::vector<Detection> kept;
  for (const Detection& d : candidates) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) { return iou(k, d) >= nms_iou; });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

Criticality classify_criticality(const std::vector<Detection>& golden, const std::vector<Detection>& faulty,
                                 double match_iou, double tolerable_iou) {
  struct Pair {
    double iou;
    std::size_t g, f;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < golden.size(); ++g) {
    for (std::size_t f = 0; f < faulty.size(); ++f) {
      const double v = iou(golden[g], faulty[f]);
      if (v >= match_iou) pairs.push_back({v, g, f});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<int> golden_match(golden.size(), -1), faulty_match(faulty.size(), -1);
  std::vector<double> match_iou_of(golden.size(), 0.0);
  for (const Pair& p : pairs) {
    if (golden_match[p.g] >= 0 || faulty_match[p.f] >= 0) continue;
    golden_match[p.g] = static_cast<int>(p.f);
    faulty_match[p.f] = static_cast<int>(p.g);
    match_iou_of[p.g] = p.iou;
  }
  if (std::find(faulty_match.begin(), faulty_match.end(), -1) != faulty_match.end()) return Criticality::FalsePositive;
  if (std::find(golden_match.begin(), golden_match.end(), -1) != golden_match.end()) return Criticality::Misdetection;
  for (std::size_t g = 0; g < golden.size(); ++g) {
    if (golden[g].class_id != faulty[static_cast<std::size_t>(golden_match[g])].class_id) {
      return Criticality::ClassChange;
    }
  }
  for (std::size_t g = 0; g < golden.size(); ++g) {
    if (match_iou_of[g] < tolerable_iou) return Criticality::BoxDrift;
  }
  return Criticality::Tolerable;
}

// ---- inference -------------------------------------------------------------

namespace {

Matrix weight_matrix(const std::vector<float>& w, std::size_t rows, std::size_t cols, Precision p) {
  Matrix m(p, rows, cols);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Word32 bits{std::bit_cast<std::uint32_t>(w[i])};
    m.words[i] = p == Precision::FP32 ? bits : fp::convert(bits, Precision::FP32, Precision::FP16);
  }
  return m;
}

Tensor leaky_relu(Tensor x, float slope) {
  const Word32 s = fp::convert(Word32{std::bit_cast<std::uint32_t>(slope)}, Precision::FP32, x.precision);
  const std::uint32_t sign = x.precision == Precision::FP16 ? 0x8000u : 0x80000000u;
  for (Word32& v : x.data) {
    if (v.bits & sign) v = fp::mul(v, s, x.precision);
  }
  return x;
}

// The GEMM operands for a layer: weights (M x K) and lowered input (K x N).
struct GemmOperands {
  Matrix weights;
  Matrix lowered;
  std::size_t out_h = 1, out_w = 1;
};

GemmOperands lower(const Layer& layer, const Tensor& x) {
  GemmOperands ops;
  if (const auto* conv = std::get_if<Conv>(&layer)) {
    ops.weights = weight_matrix(conv->weights, conv->out_channels, conv->in_channels * conv->kernel_h * conv->kernel_w,
                                x.precision);
    ops.lowered = im2col(x, conv->kernel_h, conv->kernel_w, conv->stride, conv->pad);
    ops.out_h = conv_out(x.height, conv->kernel_h, conv->stride, conv->pad);
    ops.out_w = conv_out(x.width, conv->kernel_w, conv->stride, conv->pad);
  } else {
    const auto& dense = std::get<Dense>(layer);
    ops.weights = weight_matrix(dense.weights, dense.out_features, dense.in_features, x.precision);
    ops.lowered = Matrix(x.precision, x.data.size(), 1);
    ops.lowered.words = x.data;
  }
  return ops;
}

bool is_gemm(const Layer& l) { return std::holds_alternative<Conv>(l) || std::holds_alternative<Dense>(l); }

KernelConfig gemm_config(const GemmOperands& ops, const InferenceOptions& options) {
  return KernelConfig::make(options.algorithm, options.precision, ops.weights.rows, ops.lowered.cols,
                            ops.weights.cols);
}

}  // namespace

KernelConfig layer_kernel_config(const NetworkSpec& net, std::size_t gemm_index, const InferenceOptions& options) {
  Shape s{net.in_channels, net.in_height, net.in_width};
  std::size_t g = 0;
  for (const Layer& layer : net.layers) {
    const Shape out = output_shape(layer, s);
    if (is_gemm(layer)) {
      if (g == gemm_index) {
        const std::size_t k = std::holds_alternative<Conv>(layer)
                                  ? std::get<Conv>(layer).in_channels * std::get<Conv>(layer).kernel_h *
                                        std::get<Conv>(layer).kernel_w
                                  : std::get<Dense>(layer).in_features;
        return KernelConfig::make(options.algorithm, options.precision, out.c, out.h * out.w, k);
      }
      ++g;
    }
    s = out;
  }
  throw InvalidSite("kernel index " + std::to_string(gemm_index) + " is not a GEMM layer");
}

TraceProfile network_profile(const NetworkSpec& net, const InferenceOptions& options) {
  TraceProfile p;
  for (std::size_t g = 0; g < net.gemm_layers(); ++g) {
    KernelTrace t = trace_profile(layer_kernel_config(net, g, options));
    t.name = "layer" + std::to_string(g) + "_" + t.name;
    p.kernels.push_back(std::move(t));
  }
  return p;
}

InferenceResult infer(const NetworkSpec& net, const Tensor& input, const InferenceOptions& options,
                      const std::optional<FaultDescriptor>& fault) {
  validate(net);
  require(input.channels == net.in_channels && input.height == net.in_height && input.width == net.in_width,
          "input frame does not match the network input shape");
  if (fault && fault->site.kernel >= net.gemm_layers()) {
    throw InvalidSite("kernel index " + std::to_string(fault->site.kernel) + " is not a GEMM layer");
  }
  InferenceResult result;
  Tensor x = input.precision == options.precision ? input : input.converted(options.precision);
  std::size_t g = 0;
  for (const Layer& layer : net.layers) {
    if (is_gemm(layer)) {
      const GemmOperands ops = lower(layer, x);
      std::optional<FaultDescriptor> local;
      if (fault && fault->site.kernel == g) {
        local = fault;
        local->site.kernel = 0;
      }
      const GemmResult r = run_gemm(ops.weights, ops.lowered, gemm_config(ops, options), local);
      if (r.status != ExecStatus::Completed) {
        result.status = r.status;
        return result;
      }
      x = Tensor::from_matrix(r.c, ops.out_h, ops.out_w);
      ++g;
    } else if (const auto* act = std::get_if<LeakyRelu>(&layer)) {
      x = leaky_relu(std::move(x), act->slope);
    }
  }
  result.raw = std::move(x);
  result.detections =
      decode_detections(result.raw, net.head(), options.thresholds.confidence, options.thresholds.nms_iou);
  return result;
}

// ---- session ---------------------------------------------------------------

InferenceSession::InferenceSession(std::shared_ptr<const NetworkSpec> net, const Tensor& input,
                                   InferenceOptions options)
    : net_(std::move(net)), options_(options) {
  validate(*net_);
  require(input.channels == net_->in_channels && input.height == net_->in_height && input.width == net_->in_width,
          "input frame does not match the network input shape");
  Tensor x = input.precision == options_.precision ? input : input.converted(options_.precision);
  for (std::size_t i = 0; i < net_->layers.size(); ++i) {
    const Layer& layer = net_->layers[i];
    if (is_gemm(layer)) {
      const GemmOperands ops = lower(layer, x);
      auto kernel = std::make_shared<const GemmKernel>(ops.weights, ops.lowered, gemm_config(ops, options_));
      x = Tensor::from_matrix(kernel->golden().c, ops.out_h, ops.out_w);
      stages_.push_back({i, ops.out_h, ops.out_w, std::move(kernel)});
    } else if (const auto* act = std::get_if<LeakyRelu>(&layer)) {
      x = leaky_relu(std::move(x), act->slope);
    }
  }
  golden_.raw = std::move(x);
  golden_.detections =
      decode_detections(golden_.raw, net_->head(), options_.thresholds.confidence, options_.thresholds.nms_iou);
}

Tensor InferenceSession::forward_from(std::size_t layer, Tensor x) const {
  for (std::size_t i = layer; i < net_->layers.size(); ++i) {
    const Layer& l = net_->layers[i];
    if (is_gemm(l)) {
      // Fault-free layers: the scalar reference is bit-identical to the simulator.
      const GemmOperands ops = lower(l, x);
      x = Tensor::from_matrix(reference_gemm(ops.weights, ops.lowered, gemm_config(ops, options_)), ops.out_h,
                              ops.out_w);
    } else if (const auto* act = std::get_if<LeakyRelu>(&l)) {
      x = leaky_relu(std::move(x), act->slope);
    }
  }
  return x;
}

InferenceSession::Run InferenceSession::run(const FaultDescriptor& fault) const {
  if (fault.site.kernel >= stages_.size()) {
    throw InvalidSite("kernel index " + std::to_string(fault.site.kernel) + " is not a GEMM layer");
  }
  const Stage& stage = stages_[fault.site.kernel];
  Run out;
  const GemmResult r = stage.kernel->run(fault);
  out.layer_instructions = r.warp_instructions.at(fault.site.warp);
  if (r.status != ExecStatus::Completed) {
    out.result.status = r.status;
    return out;
  }
  out.layer_diff = diff(stage.kernel->golden().c, r.c);
  if (out.layer_diff.empty()) {
    out.result = golden_;
    return out;
  }
  out.result.raw = forward_from(stage.layer + 1, Tensor::from_matrix(r.c, stage.out_h, stage.out_w));
  out.result.detections =
      decode_detections(out.result.raw, net_->head(), options_.thresholds.confidence, options_.thresholds.nms_iou);
  return out;
}

}  // namespace warpfault::nn
