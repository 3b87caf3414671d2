#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "warpfault/analysis.hpp"
#include "warpfault/fault_models.hpp"
#include "warpfault/matrix.hpp"
#include "warpfault/simt.hpp"

namespace warpfault::nn {

/// Channel-major (C, H, W) activation.
struct Tensor {
  Precision precision = Precision::FP32;
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<Word32> data;

  Tensor() = default;
  Tensor(Precision p, std::size_t c, std::size_t h, std::size_t w)
      : precision(p), channels(c), height(h), width(w), data(c * h * w) {}

  Word32& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  Word32 at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  double value(std::size_t c, std::size_t y, std::size_t x) const { return fp::to_double(at(c, y, x), precision); }

  /// Rows = channels, columns = height * width.
  Matrix as_matrix() const;
  static Tensor from_matrix(const Matrix& m, std::size_t height, std::size_t width);
  Tensor converted(Precision to) const;

  bool operator==(const Tensor&) const = default;
};

/// Convolution lowered to GEMM: weights are out_channels x (in_channels * kh * kw),
/// columns ordered (channel, ky, kx).
struct Conv {
  std::size_t out_channels = 0, in_channels = 0;
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride = 1, pad = 0;
  std::vector<float> weights;
};

struct Dense {
  std::size_t out_features = 0, in_features = 0;
  std::vector<float> weights;  // out_features x in_features
};

struct LeakyRelu {
  float slope = 0.1f;
};

/// Terminal layer: its input is the raw output tensor, boxes * (5 + classes)
/// channels on a grid x grid map. Per box: tx, ty, tw, th, confidence, class logits.
struct DetectionHead {
  std::size_t grid = 8, boxes = 2, classes = 4;
};

using Layer = std::variant<Conv, Dense, LeakyRelu, DetectionHead>;

struct NetworkSpec {
  std::size_t in_channels = 3, in_height = 32, in_width = 32;
  std::vector<Layer> layers;

  const DetectionHead& head() const;
  /// Number of GEMM-backed layers; fault kernel indices run over these.
  std::size_t gemm_layers() const;
};

/// Throws ValidationError on incompatible layer shapes.
void validate(const NetworkSpec& net);

// Weight file: "WFNN", u16 version, u32 record count, then one record per
// layer (an Input record first): u8 kind, u32 dims, raw FP32 words.
inline constexpr std::uint16_t kWeightFileVersion = 1;

void write_network(std::ostream& out, const NetworkSpec& net);
NetworkSpec read_network(std::istream& in);
void save_network(const std::filesystem::path& path, const NetworkSpec& net);
NetworkSpec load_network(const std::filesystem::path& path);

/// (kernel_h * kernel_w * channels) x (out_h * out_w); column c is the
/// receptive field of output position c. Out-of-image taps read zero.
Matrix im2col(const Tensor& input, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
              std::size_t pad = 0);

struct Detection {
  double x = 0, y = 0, w = 0, h = 0;  // center and size, normalized
  int class_id = 0;
  double confidence = 0;
  std::size_t cell = 0;
  std::size_t box = 0;
};

double iou(const Detection& a, const Detection& b);

/// [{x, y, w, h, class, confidence, cell, box}, ...]
nlohmann::json detections_to_json(const std::vector<Detection>& detections);

struct DetectionThresholds {
  double confidence = 0.9;
  double nms_iou = 0.5;
  double match_iou = 0.5;
  double tolerable_iou = 0.8;
};

std::vector<Detection> decode_detections(const Tensor& raw, const DetectionHead& head, double conf_threshold,
                                         double nms_iou);

/// Greedy one-to-one IoU matching. Checks, in order: unmatched faulty box
/// (FalsePositive), unmatched golden box (Misdetection), class change,
/// matched IoU below `tolerable_iou` (BoxDrift).
Criticality classify_criticality(const std::vector<Detection>& golden, const std::vector<Detection>& faulty,
                                 double match_iou = 0.5, double tolerable_iou = 0.8);

struct InferenceOptions {
  Precision precision = Precision::FP32;
  Algorithm algorithm = Algorithm::SoftwareGemm;
  DetectionThresholds thresholds;
};

struct InferenceResult {
  Tensor raw;
  std::vector<Detection> detections;
  ExecStatus status = ExecStatus::Completed;
};

KernelConfig layer_kernel_config(const NetworkSpec& net, std::size_t gemm_index, const InferenceOptions& options);
TraceProfile network_profile(const NetworkSpec& net, const InferenceOptions& options);

/// Runs every GEMM through the warp simulator. The fault's kernel index
/// selects the GEMM layer.
InferenceResult infer(const NetworkSpec& net, const Tensor& input, const InferenceOptions& options,
                      const std::optional<FaultDescriptor>& fault = std::nullopt);

/// Golden inference of one frame with every layer's kernel cached, so a
/// faulty run recomputes only the targeted warp and the layers after it.
/// Results match infer() bit for bit. Safe for concurrent run() calls.
class InferenceSession {
 public:
  InferenceSession(std::shared_ptr<const NetworkSpec> net, const Tensor& input, InferenceOptions options);

  struct Run {
    InferenceResult result;
    Diff layer_diff;  // targeted GEMM output, golden vs faulty
    std::uint64_t layer_instructions = 0;
  };

  const InferenceResult& golden() const { return golden_; }
  Run run(const FaultDescriptor& fault) const;

 private:
  struct Stage {
    std::size_t layer = 0;  // index into NetworkSpec::layers
    std::size_t out_h = 1, out_w = 1;
    std::shared_ptr<const GemmKernel> kernel;
  };
  std::shared_ptr<const NetworkSpec> net_;
  InferenceOptions options_;
  std::vector<Stage> stages_;
  InferenceResult golden_;

  Tensor forward_from(std::size_t layer, Tensor x) const;
};

// ---- reference assets ------------------------------------------------------

inline constexpr std::uint64_t kReferenceWeightSeed = 0x5746'4E4E'2021'0001ull;
inline constexpr std::uint64_t kReferenceFrameSeed = 0x5746'4D58'2021'0002ull;
inline constexpr std::size_t kReferenceFrameCount = 16;
/// Weight-scale gain of the detection head layer; sets the spread of raw logits.
inline constexpr double kHeadGain = 3.0;

/// 4 convolutions with LeakyReLU(0.1) between them and an 8x8 grid detection
/// head (2 boxes, 4 classes) over a 3x32x32 input.
NetworkSpec reference_network(std::uint64_t seed = kReferenceWeightSeed);

/// Procedural scenes: shaded background with a few coloured rectangles.
std::vector<Tensor> reference_frames(std::size_t count = kReferenceFrameCount,
                                     std::uint64_t seed = kReferenceFrameSeed);

/// Frames are stored as matrix dumps with rows = channels, cols = H * W.
void save_frame(const std::filesystem::path& path, const Tensor& frame);
Tensor load_frame(const std::filesystem::path& path, std::size_t height, std::size_t width);

}  // namespace warpfault::nn
