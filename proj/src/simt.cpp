#include "warpfault/simt.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <numeric>
#include <set>
#include <string>

#include "warpfault/errors.hpp"

namespace warpfault {

std::string_view to_string(RegisterClass c) {
  switch (c) {
    case RegisterClass::ArithmeticDest: return "ArithmeticDest";
    case RegisterClass::LoopCounter: return "LoopCounter";
    case RegisterClass::AddressBase: return "AddressBase";
    case RegisterClass::PredicateMask: return "PredicateMask";
  }
  return "?";
}

RegisterClass parse_register_class(std::string_view s) {
  for (auto c : {RegisterClass::ArithmeticDest, RegisterClass::LoopCounter, RegisterClass::AddressBase,
                 RegisterClass::PredicateMask}) {
    if (to_string(c) == s) return c;
  }
  if (s == "arithmetic") return RegisterClass::ArithmeticDest;
  if (s == "loop") return RegisterClass::LoopCounter;
  if (s == "address") return RegisterClass::AddressBase;
  if (s == "predicate") return RegisterClass::PredicateMask;
  throw ValidationError("unknown register class '" + std::string(s) + "'");
}

namespace {
constexpr std::array<std::string_view, 10> kOpcodeNames{"MOV", "IMAD", "IADD", "ISETP", "LDG",
                                                        "F2F", "FFMA", "HFMA2", "HMMA", "STG"};
}

std::string_view to_string(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }

Opcode parse_opcode(std::string_view s) {
  for (std::size_t i = 0; i < kOpcodeNames.size(); ++i) {
    if (kOpcodeNames[i] == s) return static_cast<Opcode>(i);
  }
  throw ValidationError("unknown opcode '" + std::string(s) + "'");
}

std::string_view to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::Completed: return "Completed";
    case ExecStatus::Hang: return "Hang";
    case ExecStatus::Crash: return "Crash";
  }
  return "?";
}

std::string_view to_string(Algorithm a) {
  return a == Algorithm::SoftwareGemm ? "software" : "tensorcore";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "software" || s == "SoftwareGemm") return Algorithm::SoftwareGemm;
  if (s == "tensorcore" || s == "TensorCoreGemm") return Algorithm::TensorCoreGemm;
  throw ValidationError("unknown GEMM algorithm '" + std::string(s) + "'");
}

KernelConfig KernelConfig::make(Algorithm algorithm, Precision precision, std::size_t m, std::size_t n,
                                std::size_t k) {
  KernelConfig c;
  c.algorithm = algorithm;
  c.precision = precision;
  c.m = m;
  c.n = n;
  c.k = k;
  if (algorithm == Algorithm::TensorCoreGemm) {
    c.tile_m = 8;
    c.tile_n = 8;
    c.tile_k = 4;
  } else {
    c.tile_m = 8;
    c.tile_n = precision == Precision::FP16 ? 8 : 4;
    c.tile_k = 1;
  }
  return c;
}

void validate(const KernelConfig& c) {
  require(c.m > 0 && c.n > 0 && c.k > 0, "GEMM dimensions must be positive");
  require(c.tile_m > 0 && c.tile_n > 0 && c.tile_k > 0, "tile sizes must be positive");
  if (c.algorithm == Algorithm::TensorCoreGemm) {
    require(c.tile_m % 4 == 0 && c.tile_n % 4 == 0 && c.tile_k % 4 == 0,
            "TensorCoreGemm tiles must be multiples of 4");
    require(c.tile_m * c.tile_n <= 256 && c.tile_k <= 64, "TensorCoreGemm tile too large");
  } else {
    const std::size_t per_lane = c.precision == Precision::FP16 ? 2 : 1;
    require(c.tile_n % per_lane == 0, "FP16 SoftwareGemm needs an even tile_n");
    require(c.tile_m * c.tile_n / per_lane <= kWarpSize, "SoftwareGemm warp tile exceeds 32 lanes");
    require(c.tile_k <= 64, "SoftwareGemm unroll too large");
  }
  auto round_up = [](std::size_t v, std::size_t t) { return (v + t - 1) / t * t; };
  const std::size_t mp = round_up(c.m, c.tile_m), np = round_up(c.n, c.tile_n), kp = round_up(c.k, c.tile_k);
  require(mp * kp < (1ull << 31) && kp * np < (1ull << 31) && mp * np < (1ull << 31),
          "GEMM too large for 32-bit addressing");
}

std::uint64_t GemmResult::dynamic_instruction_count() const {
  return std::accumulate(warp_instructions.begin(), warp_instructions.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Kernel programs

namespace {

enum class Sem : std::uint8_t {
  Zero,
  CtrAdd,
  SetP,
  SwRowBase,
  SwColBase,
  SwAddrA,
  SwAddrB,
  SwLoadA,
  SwLoadB,
  SwFma,
  SwAddrC,
  SwStore,
  TcAddrA,
  TcAddrB,
  TcLoad,
  Cvt,
  Mma,
  TcAddrC,
  TcStore,
};

struct Instr {
  Opcode op;
  RegisterClass cls;
  Sem sem;
  std::uint32_t mask;
  std::uint16_t dst = 0;
  std::uint16_t src0 = 0;
  std::uint16_t src1 = 0;
  std::uint32_t u = 0;  // k offset inside the loop iteration
  std::uint32_t fi = 0;
  std::uint32_t fj = 0;
  Operand operand = Operand::A;
  bool writes = true;
};

constexpr std::uint32_t low_mask(std::size_t lanes) {
  return lanes >= 32 ? kFullMask : ((1u << lanes) - 1);
}

}  // namespace

struct Program {
  KernelConfig cfg;
  std::size_t mp = 0, np = 0, kp = 0;
  std::size_t warps_m = 0, warps_n = 0;
  std::size_t iterations = 0;
  std::size_t regs = 0;
  std::size_t per_lane = 1;      // SoftwareGemm elements per lane
  std::uint16_t ctr = 0, pred = 0;
  std::vector<Instr> prologue, body, epilogue;

  explicit Program(const KernelConfig& c);

  std::size_t warps() const { return warps_m * warps_n; }
  std::uint64_t stream_length() const {
    return prologue.size() + iterations * body.size() + epilogue.size();
  }
  const Instr& at(std::uint64_t t) const {
    if (t < prologue.size()) return prologue[t];
    t -= prologue.size();
    if (t < iterations * body.size()) return body[t % body.size()];
    return epilogue[t - iterations * body.size()];
  }
  Coord origin(std::size_t w) const { return {(w / warps_n) * cfg.tile_m, (w % warps_n) * cfg.tile_n}; }
  std::size_t owner(std::size_t idx) const {
    return (idx / np / cfg.tile_m) * warps_n + (idx % np) / cfg.tile_n;
  }
  bool tensor() const { return cfg.algorithm == Algorithm::TensorCoreGemm; }
  bool half() const { return cfg.precision == Precision::FP16; }
  std::uint32_t acc_mask() const { return half() ? 0xFFu : 0xFFFFu; }

  // SoftwareGemm lane geometry inside the warp tile.
  std::size_t lane_row(int l) const { return static_cast<std::size_t>(l) / (cfg.tile_n / per_lane); }
  std::size_t lane_col(int l) const {
    return (static_cast<std::size_t>(l) % (cfg.tile_n / per_lane)) * per_lane;
  }

  std::vector<Coord> footprint(const Instr& in, std::size_t warp, int lane) const;
};

Program::Program(const KernelConfig& c) : cfg(c) {
  validate(c);
  auto round_up = [](std::size_t v, std::size_t t) { return (v + t - 1) / t * t; };
  mp = round_up(c.m, c.tile_m);
  np = round_up(c.n, c.tile_n);
  kp = round_up(c.k, c.tile_k);
  warps_m = mp / c.tile_m;
  warps_n = np / c.tile_n;
  iterations = kp / c.tile_k;
  const auto arith = RegisterClass::ArithmeticDest;
  const auto addr = RegisterClass::AddressBase;
  const auto loop = RegisterClass::LoopCounter;

  if (!tensor()) {
    per_lane = half() ? 2 : 1;
    const std::uint32_t lanes = low_mask(c.tile_m * c.tile_n / per_lane);
    const std::uint16_t rowbase = 0, colbase = 1, acc = 2, caddr = 5;
    ctr = 3;
    pred = 4;
    regs = 6 + 4 * c.tile_k;
    prologue = {
        {Opcode::IMAD, addr, Sem::SwRowBase, lanes, rowbase},
        {Opcode::IMAD, addr, Sem::SwColBase, lanes, colbase},
        {Opcode::MOV, arith, Sem::Zero, lanes, acc},
        {Opcode::MOV, loop, Sem::Zero, lanes, ctr},
    };
    const Opcode fma_op = half() ? Opcode::HFMA2 : Opcode::FFMA;
    for (std::uint32_t u = 0; u < c.tile_k; ++u) {
      const auto ra = static_cast<std::uint16_t>(6 + 4 * u), rb = static_cast<std::uint16_t>(ra + 1);
      const auto va = static_cast<std::uint16_t>(ra + 2), vb = static_cast<std::uint16_t>(ra + 3);
      body.push_back({Opcode::IMAD, addr, Sem::SwAddrA, lanes, ra, rowbase, 0, u});
      body.push_back({Opcode::IMAD, addr, Sem::SwAddrB, lanes, rb, colbase, 0, u});
      body.push_back({Opcode::LDG, arith, Sem::SwLoadA, lanes, va, ra, 0, u, 0, 0, Operand::A});
      body.push_back({Opcode::LDG, arith, Sem::SwLoadB, lanes, vb, rb, 0, u, 0, 0, Operand::B});
      body.push_back({fma_op, arith, Sem::SwFma, lanes, acc, va, vb, u});
    }
    body.push_back({Opcode::IADD, loop, Sem::CtrAdd, lanes, ctr});
    body.push_back({Opcode::ISETP, RegisterClass::PredicateMask, Sem::SetP, lanes, pred});
    epilogue = {
        {Opcode::IMAD, addr, Sem::SwAddrC, lanes, caddr},
        {Opcode::STG, arith, Sem::SwStore, lanes, 0, caddr, acc},
    };
    epilogue.back().writes = false;
    return;
  }

  const std::size_t fm = c.tile_m / 4, fn = c.tile_n / 4, frags = fm * fn;
  constexpr std::uint32_t frag_lanes = 0xFFFFu;
  ctr = 0;
  pred = 1;
  auto acc = [&](std::size_t f) { return static_cast<std::uint16_t>(2 + f); };
  auto caddr = [&](std::size_t f) { return static_cast<std::uint16_t>(2 + frags + f); };
  const std::size_t base = 2 + 2 * frags;
  auto a_reg = [&](std::size_t i, std::size_t which) { return static_cast<std::uint16_t>(base + 3 * i + which); };
  auto b_reg = [&](std::size_t j, std::size_t which) {
    return static_cast<std::uint16_t>(base + 3 * fm + 3 * j + which);
  };
  regs = base + 3 * (fm + fn);

  for (std::size_t f = 0; f < frags; ++f) prologue.push_back({Opcode::MOV, arith, Sem::Zero, acc_mask(), acc(f)});
  prologue.push_back({Opcode::MOV, loop, Sem::Zero, kFullMask, ctr});
  for (std::uint32_t s = 0; s < c.tile_k / 4; ++s) {
    const std::uint32_t u = 4 * s;
    for (std::uint32_t i = 0; i < fm; ++i) {
      body.push_back({Opcode::IMAD, addr, Sem::TcAddrA, frag_lanes, a_reg(i, 0), 0, 0, u, i, 0, Operand::A});
      body.push_back({Opcode::LDG, arith, Sem::TcLoad, frag_lanes, a_reg(i, 1), a_reg(i, 0), 0, u, i, 0, Operand::A});
      if (!half()) {
        body.push_back({Opcode::F2F, arith, Sem::Cvt, frag_lanes, a_reg(i, 2), a_reg(i, 1), 0, u, i, 0, Operand::A});
      }
    }
    for (std::uint32_t j = 0; j < fn; ++j) {
      body.push_back({Opcode::IMAD, addr, Sem::TcAddrB, frag_lanes, b_reg(j, 0), 0, 0, u, 0, j, Operand::B});
      body.push_back({Opcode::LDG, arith, Sem::TcLoad, frag_lanes, b_reg(j, 1), b_reg(j, 0), 0, u, 0, j, Operand::B});
      if (!half()) {
        body.push_back({Opcode::F2F, arith, Sem::Cvt, frag_lanes, b_reg(j, 2), b_reg(j, 1), 0, u, 0, j, Operand::B});
      }
    }
    const std::size_t src = half() ? 1 : 2;
    for (std::uint32_t i = 0; i < fm; ++i) {
      for (std::uint32_t j = 0; j < fn; ++j) {
        body.push_back({Opcode::HMMA, arith, Sem::Mma, acc_mask(), acc(i * fn + j), a_reg(i, src), b_reg(j, src), u,
                        i, j});
      }
    }
  }
  body.push_back({Opcode::IADD, loop, Sem::CtrAdd, kFullMask, ctr});
  body.push_back({Opcode::ISETP, RegisterClass::PredicateMask, Sem::SetP, kFullMask, pred});
  for (std::uint32_t i = 0; i < fm; ++i) {
    for (std::uint32_t j = 0; j < fn; ++j) {
      const std::size_t f = i * fn + j;
      epilogue.push_back({Opcode::IMAD, addr, Sem::TcAddrC, acc_mask(), caddr(f), 0, 0, 0, i, j});
      epilogue.push_back({Opcode::STG, arith, Sem::TcStore, acc_mask(), 0, caddr(f), acc(f), 0, i, j});
      epilogue.back().writes = false;
    }
  }
}

std::vector<Coord> Program::footprint(const Instr& in, std::size_t warp, int lane) const {
  std::vector<Coord> out;
  const Coord o = origin(warp);
  const auto l = static_cast<std::size_t>(lane);
  if (!tensor()) {
    if (lane >= 0 && (in.mask >> lane) & 1u) {
      for (std::size_t e = 0; e < per_lane; ++e) out.push_back({o.row + lane_row(lane), o.col + lane_col(lane) + e});
    }
    return out;
  }
  auto acc_elements = [&](std::size_t fi, std::size_t fj) {
    if (half()) {
      if (l < 8) {
        out.push_back({o.row + 4 * fi + l / 2, o.col + 4 * fj + 2 * (l % 2)});
        out.push_back({o.row + 4 * fi + l / 2, o.col + 4 * fj + 2 * (l % 2) + 1});
      }
    } else if (l < 16) {
      out.push_back({o.row + 4 * fi + l / 4, o.col + 4 * fj + l % 4});
    }
  };
  switch (in.sem) {
    case Sem::TcAddrA:
    case Sem::TcAddrB:
    case Sem::TcLoad:
    case Sem::Cvt:
      if (l >= 16) break;
      if (in.operand == Operand::A) {
        for (std::size_t col = 0; col < cfg.tile_n; ++col) out.push_back({o.row + 4 * in.fi + l / 4, o.col + col});
      } else {
        for (std::size_t row = 0; row < cfg.tile_m; ++row) out.push_back({o.row + row, o.col + 4 * in.fj + l % 4});
      }
      break;
    case Sem::Mma:
    case Sem::TcAddrC:
      acc_elements(in.fi, in.fj);
      break;
    case Sem::Zero:
      if (in.dst != ctr) {
        acc_elements((in.dst - 2) / (cfg.tile_n / 4), (in.dst - 2) % (cfg.tile_n / 4));
        break;
      }
      [[fallthrough]];
    default:  // loop control: everything the lane accumulates
      for (std::size_t fi = 0; fi < cfg.tile_m / 4; ++fi) {
        for (std::size_t fj = 0; fj < cfg.tile_n / 4; ++fj) acc_elements(fi, fj);
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpreter

namespace {

struct Memory {
  std::span<const Word32> a;
  std::span<const Word32> b;
  std::vector<Word32>* c;
  std::vector<std::size_t>* store_log;
};

struct WarpRun {
  ExecStatus status = ExecStatus::Completed;
  std::uint64_t executed = 0;
};

void check_site(const Program& p, const FaultDescriptor& d) {
  validate(d);
  if (d.site.warp >= p.warps()) {
    throw InvalidSite("warp " + std::to_string(d.site.warp) + " beyond kernel's " + std::to_string(p.warps()));
  }
  if (d.site.dyn_inst >= p.stream_length()) {
    throw InvalidSite("dynamic instruction " + std::to_string(d.site.dyn_inst) + " beyond trace length " +
                      std::to_string(p.stream_length()));
  }
  const Instr& in = p.at(d.site.dyn_inst);
  if (!in.writes) throw InvalidSite("instruction at fault site writes no register");
  if (in.cls != d.site.reg_class) throw InvalidSite("register class does not match the fault site");
  if (!is_warp_wide(d.model) && !((in.mask >> d.site.lane) & 1u)) {
    throw InvalidSite("lane " + std::to_string(d.site.lane) + " inactive at the fault site");
  }
}

class WarpExecutor {
 public:
  WarpExecutor(const Program& p, Memory mem, std::size_t warp, const FaultDescriptor* fault)
      : p_(p), mem_(mem), fault_(fault && fault->site.warp == warp ? fault : nullptr), o_(p.origin(warp)) {
    st_.warp_id = warp;
    st_.registers_per_lane = p.regs;
    st_.registers.assign(kWarpSize * p.regs, Word32{});
    budget_ = p.cfg.instruction_budget ? p.cfg.instruction_budget : 4 * p.stream_length();
  }

  WarpRun run() {
    st_.active_mask = kFullMask;
    for (const Instr& in : p_.prologue) {
      if (!step(in)) return {status_, st_.program_counter};
    }
    std::uint32_t looping = kFullMask;
    do {
      st_.active_mask = looping;
      for (const Instr& in : p_.body) {
        if (!step(in)) return {status_, st_.program_counter};
      }
      std::uint32_t next = 0;
      for (std::uint32_t m = looping; m; m &= m - 1) {
        const int l = std::countr_zero(m);
        if (st_.reg(l, p_.pred).bits != 0) next |= 1u << l;
      }
      looping = next;
    } while (looping);
    st_.active_mask = kFullMask;
    for (const Instr& in : p_.epilogue) {
      if (!step(in)) return {status_, st_.program_counter};
    }
    return {ExecStatus::Completed, st_.program_counter};
  }

 private:
  bool step(const Instr& in) {
    if (st_.program_counter >= budget_) {
      status_ = ExecStatus::Hang;
      return false;
    }
    const std::uint32_t mask = in.mask & st_.active_mask;
    if (!execute(in, mask)) {
      status_ = ExecStatus::Crash;
      ++st_.program_counter;
      return false;
    }
    if (fault_ && st_.program_counter == fault_->site.dyn_inst) inject(in, mask);
    ++st_.program_counter;
    return true;
  }

  void inject(const Instr& in, std::uint32_t mask) {
    std::array<Word32, kWarpSize> lanes{};
    for (int l = 0; l < kWarpSize; ++l) lanes[l] = st_.reg(l, in.dst);
    apply_fault(std::span<Word32, kWarpSize>(lanes), mask, *fault_);
    for (int l = 0; l < kWarpSize; ++l) st_.reg(l, in.dst) = lanes[l];
  }

  std::uint32_t u32(std::size_t v) const { return static_cast<std::uint32_t>(v); }

  bool load(std::span<const Word32> m, std::uint32_t addr, Word32& out) const {
    if (addr >= m.size()) return false;
    out = m[addr];
    return true;
  }

  bool store(std::uint64_t addr, Word32 value) {
    if (addr >= mem_.c->size()) return false;
    (*mem_.c)[addr] = value;
    if (mem_.store_log) mem_.store_log->push_back(addr);
    return true;
  }

  // Loads are predicated on the logical k index, as in guarded GEMM tile
  // iterators: a runaway loop counter reads zeros instead of faulting.
  bool past_k(std::uint32_t k) const { return k >= p_.kp; }

  Word32 half_of(Word32 w, int which) const { return {which ? (w.bits >> 16) : (w.bits & 0xFFFFu)}; }

  bool execute(const Instr& in, std::uint32_t mask) {
    const KernelConfig& cfg = p_.cfg;
    const Precision prec = cfg.precision;
    if (in.sem == Sem::Mma) {
      if (mask) mma(in, mask);
      return true;
    }
    for (std::uint32_t m = mask; m; m &= m - 1) {
      const int l = std::countr_zero(m);
      const auto ul = static_cast<std::size_t>(l);
      Word32& dst = st_.reg(l, in.dst);
      const std::uint32_t c = st_.reg(l, p_.ctr).bits;
      switch (in.sem) {
        case Sem::Zero:
          dst = {0};
          break;
        case Sem::CtrAdd:
          dst = {c + u32(cfg.tile_k)};
          break;
        case Sem::SetP:
          dst = {static_cast<std::int32_t>(c) < static_cast<std::int32_t>(p_.kp) ? 1u : 0u};
          break;
        case Sem::SwRowBase:
          dst = {u32((o_.row + p_.lane_row(l)) * p_.kp)};
          break;
        case Sem::SwColBase:
          dst = {u32(o_.col + p_.lane_col(l))};
          break;
        case Sem::SwAddrA:
          dst = {st_.reg(l, in.src0).bits + c + in.u};
          break;
        case Sem::SwAddrB:
          dst = {(c + in.u) * u32(p_.np) + st_.reg(l, in.src0).bits};
          break;
        case Sem::SwLoadA: {
          if (past_k(c + in.u)) {
            dst = {0};
            break;
          }
          Word32 v;
          if (!load(mem_.a, st_.reg(l, in.src0).bits, v)) return false;
          dst = prec == Precision::FP16 ? pack_fp16_pair(static_cast<std::uint16_t>(v.bits),
                                                         static_cast<std::uint16_t>(v.bits))
                                        : v;
          break;
        }
        case Sem::SwLoadB: {
          if (past_k(c + in.u)) {
            dst = {0};
            break;
          }
          const std::uint32_t addr = st_.reg(l, in.src0).bits;
          Word32 v;
          if (!load(mem_.b, addr, v)) return false;
          if (prec == Precision::FP16) {
            Word32 hi;
            if (addr == 0xFFFFFFFFu || !load(mem_.b, addr + 1, hi)) return false;
            v = pack_fp16_pair(static_cast<std::uint16_t>(v.bits), static_cast<std::uint16_t>(hi.bits));
          }
          dst = v;
          break;
        }
        case Sem::SwFma: {
          const Word32 a = st_.reg(l, in.src0), b = st_.reg(l, in.src1);
          if (prec == Precision::FP16) {
            const Word32 lo = fp::fma(half_of(a, 0), half_of(b, 0), half_of(dst, 0), prec, RoundingMode::NearestEven);
            const Word32 hi = fp::fma(half_of(a, 1), half_of(b, 1), half_of(dst, 1), prec, RoundingMode::NearestEven);
            dst = pack_fp16_pair(static_cast<std::uint16_t>(lo.bits), static_cast<std::uint16_t>(hi.bits));
          } else {
            dst = fp::fma(a, b, dst, prec, RoundingMode::NearestEven);
          }
          break;
        }
        case Sem::SwAddrC:
          dst = {u32((o_.row + p_.lane_row(l)) * p_.np + o_.col + p_.lane_col(l))};
          break;
        case Sem::SwStore: {
          const std::uint64_t addr = st_.reg(l, in.src0).bits;
          const Word32 acc = st_.reg(l, in.src1);
          if (prec == Precision::FP16) {
            if (!store(addr, half_of(acc, 0)) || !store(addr + 1, half_of(acc, 1))) return false;
          } else if (!store(addr, acc)) {
            return false;
          }
          break;
        }
        case Sem::TcAddrA:
          dst = {u32((o_.row + 4 * in.fi + ul / 4) * p_.kp) + c + in.u + u32(ul % 4)};
          break;
        case Sem::TcAddrB:
          dst = {(c + in.u + u32(ul / 4)) * u32(p_.np) + u32(o_.col + 4 * in.fj + ul % 4)};
          break;
        case Sem::TcLoad: {
          if (past_k(c + in.u + u32(in.operand == Operand::A ? ul % 4 : ul / 4))) {
            dst = {0};
            break;
          }
          Word32 v;
          if (!load(in.operand == Operand::A ? mem_.a : mem_.b, st_.reg(l, in.src0).bits, v)) return false;
          dst = prec == Precision::FP16 ? Word32{v.bits & 0xFFFFu} : v;
          break;
        }
        case Sem::Cvt:
          dst = fp::convert(st_.reg(l, in.src0), Precision::FP32, Precision::FP16, RoundingMode::NearestEven);
          break;
        case Sem::TcAddrC:
          dst = prec == Precision::FP16
                    ? Word32{u32((o_.row + 4 * in.fi + ul / 2) * p_.np + o_.col + 4 * in.fj + 2 * (ul % 2))}
                    : Word32{u32((o_.row + 4 * in.fi + ul / 4) * p_.np + o_.col + 4 * in.fj + ul % 4)};
          break;
        case Sem::TcStore: {
          const std::uint64_t addr = st_.reg(l, in.src0).bits;
          const Word32 acc = st_.reg(l, in.src1);
          if (prec == Precision::FP16) {
            if (!store(addr, half_of(acc, 0)) || !store(addr + 1, half_of(acc, 1))) return false;
          } else if (!store(addr, acc)) {
            return false;
          }
          break;
        }
        case Sem::Mma:
          break;
      }
    }
    return true;
  }

  // The collective reads fragment registers of every lane; only active
  // lanes receive results.
  void mma(const Instr& in, std::uint32_t mask) {
    const bool fp16_out = p_.cfg.precision == Precision::FP16;
    Tile4x4 a{Precision::FP16, {}}, b{Precision::FP16, {}};
    Tile4x4 c{p_.cfg.precision, {}};
    for (int l = 0; l < 16; ++l) {
      a.values[l] = {st_.reg(l, in.src0).bits & 0xFFFFu};
      b.values[l] = {st_.reg(l, in.src1).bits & 0xFFFFu};
    }
    if (fp16_out) {
      for (int l = 0; l < 8; ++l) {
        const Word32 w = st_.reg(l, in.dst);
        c.values[2 * l] = half_of(w, 0);
        c.values[2 * l + 1] = half_of(w, 1);
      }
    } else {
      for (int l = 0; l < 16; ++l) c.values[l] = st_.reg(l, in.dst);
    }
    const Tile4x4 d = mma_4x4(a, b, c, p_.cfg.precision);
    for (std::uint32_t m = mask; m; m &= m - 1) {
      const int l = std::countr_zero(m);
      st_.reg(l, in.dst) = fp16_out ? pack_fp16_pair(static_cast<std::uint16_t>(d.values[2 * l].bits),
                                                     static_cast<std::uint16_t>(d.values[2 * l + 1].bits))
                                    : d.values[l];
    }
  }

  const Program& p_;
  Memory mem_;
  const FaultDescriptor* fault_;
  Coord o_;
  WarpState st_;
  std::uint64_t budget_ = 0;
  ExecStatus status_ = ExecStatus::Completed;
};

std::vector<Word32> pad(const Matrix& m, std::size_t rows, std::size_t cols) {
  std::vector<Word32> out(rows * cols, Word32{0});
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::copy_n(m.words.begin() + static_cast<std::ptrdiff_t>(r * m.cols), m.cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  return out;
}

Matrix crop(const std::vector<Word32>& padded, std::size_t np, const KernelConfig& cfg) {
  Matrix c(cfg.precision, cfg.m, cfg.n);
  for (std::size_t r = 0; r < cfg.m; ++r) {
    std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(r * np), cfg.n,
                c.words.begin() + static_cast<std::ptrdiff_t>(r * cfg.n));
  }
  return c;
}

void check_operands(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  require(a.rows == cfg.m && a.cols == cfg.k, "A must be m x k");
  require(b.rows == cfg.k && b.cols == cfg.n, "B must be k x n");
  require(a.precision == cfg.precision && b.precision == cfg.precision, "operand precision mismatch");
}

GemmResult run_all_warps(const Program& p, std::span<const Word32> a, std::span<const Word32> b,
                         const FaultDescriptor* fault, std::vector<Word32>& c) {
  c.assign(p.mp * p.np, Word32{0});
  GemmResult result;
  result.warp_instructions.assign(p.warps(), 0);
  for (std::size_t w = 0; w < p.warps(); ++w) {
    WarpExecutor exec(p, {a, b, &c, nullptr}, w, fault);
    const WarpRun run = exec.run();
    result.warp_instructions[w] = run.executed;
    if (run.status != ExecStatus::Completed) {
      result.status = run.status;
      break;
    }
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------

KernelTrace trace_profile(const KernelConfig& config) {
  const Program p(config);
  KernelTrace t;
  t.name = std::string(config.algorithm == Algorithm::SoftwareGemm ? "sgemm_" : "hmma_") +
           std::string(to_string(config.precision)) + "_" + std::to_string(config.m) + "x" +
           std::to_string(config.n) + "x" + std::to_string(config.k);
  t.warps = p.warps();
  t.instructions.reserve(p.stream_length());
  for (std::uint64_t i = 0; i < p.stream_length(); ++i) {
    const Instr& in = p.at(i);
    t.instructions.push_back({in.op, in.cls, in.writes, in.mask});
  }
  return t;
}

std::vector<Coord> site_to_elements(const FaultSite& site, const KernelConfig& config) {
  const Program p(config);
  if (site.warp >= p.warps() || site.dyn_inst >= p.stream_length()) {
    throw InvalidSite("fault site outside the kernel trace");
  }
  const Instr& in = p.at(site.dyn_inst);
  if (!in.writes) throw InvalidSite("instruction at fault site writes no register");
  std::set<Coord> out;
  for (int l = 0; l < kWarpSize; ++l) {
    if (site.lane != kAllLanes && site.lane != l) continue;
    if (!((in.mask >> l) & 1u)) {
      if (site.lane == l) throw InvalidSite("lane inactive at the fault site");
      continue;
    }
    for (Coord c : p.footprint(in, site.warp, l)) {
      if (c.row < config.m && c.col < config.n) out.insert(c);
    }
  }
  return {out.begin(), out.end()};
}

GemmResult run_gemm(const Matrix& a, const Matrix& b, const KernelConfig& config,
                    const std::optional<FaultDescriptor>& fault) {
  const Program p(config);
  check_operands(a, b, config);
  if (fault) {
    if (fault->site.kernel != 0) throw InvalidSite("GEMM has a single kernel (index 0)");
    check_site(p, *fault);
  }
  const auto ap = pad(a, p.mp, p.kp);
  const auto bp = pad(b, p.kp, p.np);
  std::vector<Word32> c;
  GemmResult r = run_all_warps(p, ap, bp, fault ? &*fault : nullptr, c);
  r.c = crop(c, p.np, config);
  return r;
}

Matrix reference_gemm(const Matrix& a, const Matrix& b, const KernelConfig& config) {
  validate(config);
  check_operands(a, b, config);
  const Precision prec = config.precision;
  Matrix c(prec, config.m, config.n);
  if (config.algorithm == Algorithm::SoftwareGemm) {
    for (std::size_t i = 0; i < config.m; ++i) {
      for (std::size_t j = 0; j < config.n; ++j) {
        Word32 acc = fp::zero(prec);
        for (std::size_t kk = 0; kk < config.k; ++kk) {
          acc = fp::fma(a.at(i, kk), b.at(kk, j), acc, prec, RoundingMode::NearestEven);
        }
        c.at(i, j) = acc;
      }
    }
    return c;
  }
  auto to_half = [&](Word32 w) {
    return prec == Precision::FP16 ? w : fp::convert(w, Precision::FP32, Precision::FP16);
  };
  auto widen = [](Word32 h) { return fp::convert(h, Precision::FP16, Precision::FP32); };
  for (std::size_t i = 0; i < config.m; ++i) {
    for (std::size_t j = 0; j < config.n; ++j) {
      Word32 acc = fp::zero(Precision::FP32);
      Word32 out = fp::zero(prec);
      for (std::size_t k0 = 0; k0 < config.k; k0 += 4) {
        for (std::size_t kk = k0; kk < k0 + 4; ++kk) {
          const Word32 x = kk < config.k ? widen(to_half(a.at(i, kk))) : fp::zero(Precision::FP32);
          const Word32 y = kk < config.k ? widen(to_half(b.at(kk, j))) : fp::zero(Precision::FP32);
          acc = fp::fma(x, y, acc, Precision::FP32, RoundingMode::TowardZero);
        }
        if (prec == Precision::FP16) {
          out = fp::convert(acc, Precision::FP32, Precision::FP16, RoundingMode::TowardZero);
          acc = widen(out);
        } else {
          out = acc;
        }
      }
      c.at(i, j) = out;
    }
  }
  return c;
}

FaultSite locate_operand_load(const KernelConfig& config, Operand operand, Coord out, std::size_t kk) {
  const Program p(config);
  require(out.row < config.m && out.col < config.n && kk < config.k, "operand position outside the GEMM");
  const std::size_t warp = (out.row / config.tile_m) * p.warps_n + out.col / config.tile_n;
  const Coord o = p.origin(warp);
  const std::size_t r = out.row - o.row, col = out.col - o.col;
  const std::size_t iteration = kk / config.tile_k, u = kk % config.tile_k;

  int lane = -1;
  auto matches = [&](const Instr& in) {
    if (!p.tensor()) {
      return (in.sem == Sem::SwLoadA || in.sem == Sem::SwLoadB) && in.operand == operand && in.u == u;
    }
    if (in.sem != Sem::TcLoad || in.operand != operand || in.u != u / 4 * 4) return false;
    return operand == Operand::A ? in.fi == r / 4 : in.fj == col / 4;
  };
  if (!p.tensor()) {
    lane = static_cast<int>(r * (config.tile_n / p.per_lane) + col / p.per_lane);
  } else {
    lane = operand == Operand::A ? static_cast<int>((r % 4) * 4 + kk % 4) : static_cast<int>((kk % 4) * 4 + col % 4);
  }
  for (std::size_t t = 0; t < p.body.size(); ++t) {
    if (!matches(p.body[t])) continue;
    FaultSite site;
    site.warp = warp;
    site.lane = lane;
    site.dyn_inst = p.prologue.size() + iteration * p.body.size() + t;
    site.reg_class = RegisterClass::ArithmeticDest;
    site.storage_class = StorageClass::ProtectedRegister;
    return site;
  }
  throw InvalidSite("no load instruction for the requested operand");
}

// ---------------------------------------------------------------------------

GemmKernel::GemmKernel(const Matrix& a, const Matrix& b, const KernelConfig& config)
    : program_(std::make_shared<const Program>(config)) {
  check_operands(a, b, config);
  const Program& p = *program_;
  a_padded_ = pad(a, p.mp, p.kp);
  b_padded_ = pad(b, p.kp, p.np);
  trace_ = trace_profile(config);
  golden_ = run_all_warps(p, a_padded_, b_padded_, nullptr, golden_padded_);
  golden_.c = crop(golden_padded_, p.np, config);
}

const KernelConfig& GemmKernel::config() const { return program_->cfg; }

GemmResult GemmKernel::run(const std::optional<FaultDescriptor>& fault) const {
  if (!fault) return golden_;
  const Program& p = *program_;
  check_site(p, *fault);
  const std::size_t w = fault->site.warp;

  // Replay of warp w against C as it stood when w ran: warps < w already
  // stored golden values, warps > w have not stored yet and overwrite
  // anything w scribbles into their region.
  std::vector<Word32> c = golden_padded_;
  const Coord o = p.origin(w);
  for (std::size_t r = 0; r < p.cfg.tile_m; ++r) {
    std::fill_n(c.begin() + static_cast<std::ptrdiff_t>((o.row + r) * p.np + o.col), p.cfg.tile_n, Word32{0});
  }
  std::vector<std::size_t> stores;
  WarpExecutor exec(p, {a_padded_, b_padded_, &c, &stores}, w, &*fault);
  const WarpRun run = exec.run();
  for (std::size_t idx : stores) {
    if (p.owner(idx) > w) c[idx] = golden_padded_[idx];
  }

  GemmResult result;
  result.status = run.status;
  result.warp_instructions = golden_.warp_instructions;
  result.warp_instructions[w] = run.executed;
  if (run.status != ExecStatus::Completed) {
    // A full run stops at the failing warp.
    std::fill(result.warp_instructions.begin() + static_cast<std::ptrdiff_t>(w) + 1,
              result.warp_instructions.end(), 0);
  }
  result.c = crop(c, p.np, p.cfg);
  return result;
}

GemmResult GemmKernel::run_full(const std::optional<FaultDescriptor>& fault) const {
  const Program& p = *program_;
  if (fault) check_site(p, *fault);
  std::vector<Word32> c;
  GemmResult r = run_all_warps(p, a_padded_, b_padded_, fault ? &*fault : nullptr, c);
  r.c = crop(c, p.np, p.cfg);
  return r;
}

}  // namespace warpfault
