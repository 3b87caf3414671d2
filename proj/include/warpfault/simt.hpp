#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "warpfault/fault_models.hpp"
#include "warpfault/matrix.hpp"
#include "warpfault/numerics.hpp"
#include "warpfault/simt_types.hpp"

namespace warpfault {

enum class Algorithm : std::uint8_t { SoftwareGemm, TensorCoreGemm };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

// Tiling. Each warp owns a tile_m x tile_n block of C.
//
// SoftwareGemm: lane l owns one element (FP32) or one adjacent column pair
// packed in a single register (FP16, HFMA2). With p = elements per lane and
// w = tile_n / p, lane l sits at tile row l / w, column (l % w) * p. The k
// loop is unrolled tile_k times.
//
// TensorCoreGemm: the warp tile is split into 4x4 fragments. Lanes 0..15
// each load one element of every A/B fragment; accumulators live in lanes
// 0..15 (FP32, one element each) or lanes 0..7 (FP16, one row-adjacent
// pair each). One HMMA per fragment per 4-deep k step. FP32 inputs go
// through an explicit F2F cast to FP16 before the HMMA.
//
// Dimensions that are not tile multiples are zero-padded; padding results
// are cropped from the output.
struct KernelConfig {
  Algorithm algorithm = Algorithm::SoftwareGemm;
  Precision precision = Precision::FP32;
  std::size_t m = 0, n = 0, k = 0;
  std::size_t tile_m = 8, tile_n = 4, tile_k = 1;
  // Per-warp limit on executed instructions. 0 selects 4x the fault-free count.
  std::uint64_t instruction_budget = 0;

  /// Default tiles: SoftwareGemm 8x4x1 (FP32) or 8x8x1 (FP16), TensorCoreGemm 8x8x4.
  static KernelConfig make(Algorithm algorithm, Precision precision, std::size_t m, std::size_t n,
                           std::size_t k);

  bool operator==(const KernelConfig&) const = default;
};

/// Throws ContractViolation for unusable dimensions or tiles.
void validate(const KernelConfig& config);

struct GemmResult {
  Matrix c;
  ExecStatus status = ExecStatus::Completed;
  std::vector<std::uint64_t> warp_instructions;

  std::uint64_t dynamic_instruction_count() const;
};

/// Per-lane register files of one warp plus its control state.
struct WarpState {
  std::size_t warp_id = 0;
  std::size_t registers_per_lane = 0;
  std::vector<Word32> registers;  // lane-major
  std::uint64_t program_counter = 0;
  std::uint32_t active_mask = 0;

  Word32& reg(int lane, std::size_t r) { return registers[static_cast<std::size_t>(lane) * registers_per_lane + r]; }
  Word32 reg(int lane, std::size_t r) const {
    return registers[static_cast<std::size_t>(lane) * registers_per_lane + r];
  }
};

/// Fault-free dynamic instruction stream of one warp for `config`.
KernelTrace trace_profile(const KernelConfig& config);

/// Output coordinates fed by the destination register at `site` (union over
/// active lanes for lane = kAllLanes), cropped to the m x n output.
std::vector<Coord> site_to_elements(const FaultSite& site, const KernelConfig& config);

/// Executes every warp in order 0..W-1 against zero-initialised C.
/// A fault, when present, must address kernel 0.
GemmResult run_gemm(const Matrix& a, const Matrix& b, const KernelConfig& config,
                    const std::optional<FaultDescriptor>& fault = std::nullopt);

/// Scalar triple loop with the same rounding scheme as the kernel.
Matrix reference_gemm(const Matrix& a, const Matrix& b, const KernelConfig& config);

enum class Operand : std::uint8_t { A, B };

/// Site of the load that brings operand element (row, kk) of A, or (kk, col)
/// of B, into the lane responsible for output element `out`.
FaultSite locate_operand_load(const KernelConfig& config, Operand operand, Coord out, std::size_t kk);

struct Program;

/// A kernel bound to fixed inputs with its golden result precomputed.
/// Faulty runs simulate only the targeted warp and patch its stores into
/// the golden output, which is bit-identical to a full run because warps
/// share no state. Safe for concurrent run() calls.
class GemmKernel {
 public:
  GemmKernel(const Matrix& a, const Matrix& b, const KernelConfig& config);

  const KernelConfig& config() const;
  const KernelTrace& trace() const { return trace_; }
  const GemmResult& golden() const { return golden_; }

  /// Site kernel index is not checked; callers route kernels themselves.
  GemmResult run(const std::optional<FaultDescriptor>& fault) const;
  GemmResult run_full(const std::optional<FaultDescriptor>& fault) const;

 private:
  std::shared_ptr<const Program> program_;
  std::vector<Word32> a_padded_;
  std::vector<Word32> b_padded_;
  std::vector<Word32> golden_padded_;
  KernelTrace trace_;
  GemmResult golden_;
};

}  // namespace warpfault
