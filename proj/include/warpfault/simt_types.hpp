#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace warpfault {

inline constexpr int kWarpSize = 32;
inline constexpr std::uint32_t kFullMask = 0xFFFFFFFFu;

/// What a destination register holds; decides which faults can reach control flow.
enum class RegisterClass : std::uint8_t { ArithmeticDest, LoopCounter, AddressBase, PredicateMask };

enum class Opcode : std::uint8_t { MOV, IMAD, IADD, ISETP, LDG, F2F, FFMA, HFMA2, HMMA, STG };

enum class ExecStatus : std::uint8_t { Completed, Hang, Crash };

std::string_view to_string(RegisterClass c);
RegisterClass parse_register_class(std::string_view s);
std::string_view to_string(Opcode op);
Opcode parse_opcode(std::string_view s);
std::string_view to_string(ExecStatus s);

/// One dynamic instruction of a warp's fault-free stream.
struct TraceEntry {
  Opcode opcode = Opcode::MOV;
  RegisterClass reg_class = RegisterClass::ArithmeticDest;
  bool writes_register = true;
  std::uint32_t active_mask = kFullMask;
};

/// Fault-free dynamic instruction stream of one kernel. Every warp of a
/// kernel runs the same stream.
struct KernelTrace {
  std::string name;
  std::size_t warps = 0;
  std::vector<TraceEntry> instructions;

  std::uint64_t instructions_per_warp() const { return instructions.size(); }
  std::uint64_t total_instructions() const { return warps * instructions.size(); }
};

struct TraceProfile {
  std::vector<KernelTrace> kernels;

  std::uint64_t total_instructions() const {
    std::uint64_t total = 0;
    for (const auto& k : kernels) total += k.total_instructions();
    return total;
  }
};

}  // namespace warpfault
