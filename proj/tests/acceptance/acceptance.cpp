// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Run with a criterion number (1..10) to execute a single one.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "conv_oracle.hpp"
#include "gemm_oracle.hpp"
#include "geometry_oracle.hpp"
#include "oracle/mpfr_oracle.hpp"
#include "warpfault/campaign.hpp"
#include "warpfault/rng.hpp"

using namespace warpfault;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

CampaignConfig gemm_campaign(Algorithm alg, Precision p, std::size_t dim, FaultModel model, std::uint64_t count) {
  CampaignConfig c;
  c.kind = TargetKind::Gemm;
  c.gemm.algorithm = alg;
  c.gemm.precision = p;
  c.gemm.m = c.gemm.n = c.gemm.k = dim;
  c.mix = {{model, count}};
  c.seed = 2024;
  return c;
}

const CampaignStats& stats_of(const CampaignResult& r, FaultModel m) {
  for (const auto& [name, s] : r.stats) {
    if (name == to_string(m)) return s;
  }
  std::abort();
}

double half_width(const Fraction& f) { return (f.ci.hi - f.ci.lo) / 2.0; }

// ---- 1 ----------------------------------------------------------------------
Verdict single_bit_flip_geometry() {
  const CampaignConfig c = gemm_campaign(Algorithm::SoftwareGemm, Precision::FP32, 256, FaultModel::SingleBitFlip, 644);
  const CampaignResult r = run_campaign(c);
  const CampaignStats& s = r.stats.back().second;
  const std::uint64_t single = s.sdc_by_geometry[static_cast<std::size_t>(GeometryClass::Single)];
  return {r.anomalies == 0 && s.sdc > 0 && single == s.sdc,
          fmt("%llu/%llu SDCs Single (n=%llu)", (unsigned long long)single, (unsigned long long)s.sdc,
              (unsigned long long)s.n)};
}

// ---- 2 ----------------------------------------------------------------------
Verdict fp16_dual_corruption() {
  CampaignConfig c = gemm_campaign(Algorithm::SoftwareGemm, Precision::FP16, 256, FaultModel::SingleRandomValue, 644);
  c.filter.opcodes = {Opcode::HFMA2};
  const CampaignResult r = run_campaign(c);
  std::size_t sdc = 0, dual = 0, min_size = SIZE_MAX;
  for (const LogRecord& rec : r.log.records) {
    if (!rec.outcome || !std::holds_alternative<Sdc>(*rec.outcome)) continue;
    ++sdc;
    dual += rec.corrupted >= 2;
    min_size = std::min(min_size, rec.corrupted);
  }
  return {r.anomalies == 0 && sdc > 0 && dual == sdc,
          fmt("%zu/%zu SDCs corrupt >= 2 elements (min %zu)", dual, sdc, sdc ? min_size : 0)};
}

// ---- 3 ----------------------------------------------------------------------
Verdict warp_wide_square() {
  bool pass = true;
  std::string detail;
  for (Precision p : {Precision::FP16, Precision::FP32}) {
    const CampaignConfig c = gemm_campaign(Algorithm::SoftwareGemm, p, 256, FaultModel::WarpRandomValue, 644);
    const CampaignResult r = run_campaign(c);
    const CampaignStats& s = r.stats.back().second;
    const double square =
        s.sdc ? double(s.sdc_by_geometry[static_cast<std::size_t>(GeometryClass::Square)]) / double(s.sdc) : 0.0;
    pass = pass && r.anomalies == 0 && s.sdc > 0 && square >= 0.90;
    detail += fmt("%s Square %.3f of %llu SDCs; ", std::string(to_string(p)).c_str(), square,
                  (unsigned long long)s.sdc);
  }
  return {pass, detail};
}

// ---- 4 ----------------------------------------------------------------------
Verdict ecc_model() {
  CampaignConfig sbf = gemm_campaign(Algorithm::SoftwareGemm, Precision::FP32, 128, FaultModel::SingleBitFlip, 200);
  sbf.ecc = EccMode::SecDed;
  sbf.storage = {{FaultModel::SingleBitFlip, StorageClass::ProtectedRegister},
                 {FaultModel::DoubleBitFlip, StorageClass::ProtectedRegister},
                 {FaultModel::WarpRandomValue, StorageClass::UnprotectedDatapath}};
  const auto target = make_target(sbf);
  const CampaignStats s1 = stats_of(run_campaign(sbf, *target), FaultModel::SingleBitFlip);

  CampaignConfig dbf = sbf;
  dbf.mix = {{FaultModel::DoubleBitFlip, 200}};
  const CampaignStats s2 = stats_of(run_campaign(dbf, *target), FaultModel::DoubleBitFlip);

  CampaignConfig wrv = sbf;
  wrv.mix = {{FaultModel::WarpRandomValue, 200}};
  const Fraction with_ecc = stats_of(run_campaign(wrv, *target), FaultModel::WarpRandomValue).svf();
  wrv.ecc = EccMode::Off;
  const Fraction without = stats_of(run_campaign(wrv, *target), FaultModel::WarpRandomValue).svf();
  const bool overlap = with_ecc.ci.lo <= without.ci.hi && without.ci.lo <= with_ecc.ci.hi;

  return {s1.masked == 200 && s2.due == 200 && overlap,
          fmt("SBF masked %llu/200, DBF DUE %llu/200, WRV SDC %.3f [%.3f,%.3f] vs off %.3f [%.3f,%.3f]",
              (unsigned long long)s1.masked, (unsigned long long)s2.due, with_ecc.value, with_ecc.ci.lo,
              with_ecc.ci.hi, without.value, without.ci.lo, without.ci.hi)};
}

// ---- 5 ----------------------------------------------------------------------
bool clearly_greater(const Fraction& a, const Fraction& b) {
  return a.value - b.value > half_width(a) + half_width(b);
}

Verdict criticality_ordering() {
  bool pass = true;
  std::string detail;
  for (Precision p : {Precision::FP16, Precision::FP32}) {
    CampaignConfig c;
    c.kind = TargetKind::Network;
    c.network.precision = p;
    for (FaultModel m : kAllFaultModels) c.mix[m] = 2000;
    c.seed = 2024;
    c.workers = std::max(1u, std::thread::hardware_concurrency());
    const CampaignResult r = run_campaign(c);
    const Fraction wrv = stats_of(r, FaultModel::WarpRandomValue).critical_svf();
    const Fraction srv = stats_of(r, FaultModel::SingleRandomValue).critical_svf();
    const Fraction sbf = stats_of(r, FaultModel::SingleBitFlip).critical_svf();
    const Fraction wzv = stats_of(r, FaultModel::WarpZeroValue).critical_svf();
    const Fraction overall = r.stats.back().second.critical_svf();
    const bool ok = r.anomalies == 0 && clearly_greater(wrv, srv) && clearly_greater(srv, sbf) &&
                    clearly_greater(overall, wzv);
    pass = pass && ok;
    detail += fmt("%s critical SVF WRV %.3f > SRV %.3f > SBF %.3f, WZV %.3f < overall %.3f%s; ",
                  std::string(to_string(p)).c_str(), wrv.value, srv.value, sbf.value, wzv.value, overall.value,
                  ok ? "" : " (violated)");
  }
  return {pass, detail};
}

// ---- 6 ----------------------------------------------------------------------
Verdict geometry_oracle() {
  std::size_t agree = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto coords = oracle::random_coordinate_set(derive_seed(77, "acceptance", s));
    agree += classify_geometry(coords) == oracle::classify(coords);
  }
  return {agree == 1000, fmt("%zu/1000 sets agree", agree)};
}

// ---- 7 ----------------------------------------------------------------------
Verdict fit_arithmetic() {
  const double base = fit(100, {1e10, 13.0});
  std::size_t linear = 0;
  Rng rng(derive_seed(7, "fit", 0));
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::fabs(b); };
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t n = 1 + uniform_below(rng, 10000), k = 1 + uniform_below(rng, 20);
    const FitParams p{std::pow(10.0, 6.0 + 8.0 * uniform_unit(rng)), 1.0 + 99.0 * uniform_unit(rng)};
    const FitParams double_fluence{2.0 * p.fluence, p.reference_flux};
    const FitParams double_flux{p.fluence, 2.0 * p.reference_flux};
    linear += close(fit(k * n, p), double(k) * fit(n, p)) && close(fit(n, double_fluence), fit(n, p) / 2.0) &&
              close(fit(n, double_flux), 2.0 * fit(n, p)) && close(fit(n, p), cross_section(n, p) * p.reference_flux * 1e9);
  }
  return {base == 130.0 && linear == 100, fmt("fit(100, 1e10, 13) = %.17g, linearity %zu/100", base, linear)};
}

// ---- 8 ----------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict determinism_and_replay() {
  const fs::path dir = fs::temp_directory_path() / "warpfault_acceptance_c8";
  fs::create_directories(dir);
  bool pass = true;
  std::string detail;

  auto check = [&](const std::string& label, CampaignConfig c) {
    const auto target = make_target(c);
    std::vector<std::string> logs;
    std::vector<NamedStats> stats;
    for (unsigned workers : {1u, 4u, 1u}) {
      c.workers = workers;
      const fs::path path = dir / (label + std::to_string(logs.size()) + ".jsonl");
      const CampaignResult r = run_campaign(c, *target, {path, false});
      logs.push_back(slurp(path));
      stats.push_back(r.stats);
    }
    const bool identical = logs[0] == logs[1] && logs[1] == logs[2] && stats[0] == stats[1] && stats[1] == stats[2];
    const CampaignLog log = read_log(dir / (label + "0.jsonl"));
    std::size_t matched = 0;
    for (const LogRecord& rec : log.records) matched += replay(log, *target, rec.index).match;
    // One record through the path that rebuilds the golden from the log alone.
    const bool standalone = replay(log, log.records.size() / 2).match;
    pass = pass && identical && matched == log.records.size() && standalone;
    detail += fmt("%s: logs %s, replay %zu/%zu; ", label.c_str(), identical ? "identical" : "DIFFER", matched,
                  log.records.size());
  };

  CampaignConfig gemm = gemm_campaign(Algorithm::TensorCoreGemm, Precision::FP16, 96, FaultModel::SingleBitFlip, 100);
  for (FaultModel m : kAllFaultModels) gemm.mix[m] = 100;
  gemm.filter.classes = {RegisterClass::ArithmeticDest, RegisterClass::LoopCounter, RegisterClass::AddressBase,
                         RegisterClass::PredicateMask};
  gemm.ecc = EccMode::SecDed;
  check("gemm", gemm);

  CampaignConfig net;
  net.kind = TargetKind::Network;
  net.network.frame_count = 4;
  for (FaultModel m : kAllFaultModels) net.mix[m] = 40;
  net.seed = 8;
  check("network", net);

  fs::remove_all(dir);
  return {pass, detail};
}

// ---- 9 ----------------------------------------------------------------------
Verdict gemm_oracle() {
  std::size_t gemm_ok = 0, conv_ok = 0;
  for (Precision p : {Precision::FP16, Precision::FP32}) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      Rng rng(derive_seed(9, to_string(p), s));
      const std::size_t m = 1 + uniform_below(rng, 48), n = 1 + uniform_below(rng, 48), k = 1 + uniform_below(rng, 48);
      const Matrix a = random_matrix(m, k, p, derive_seed(s, "a", 0));
      const Matrix b = random_matrix(k, n, p, derive_seed(s, "b", 0));
      gemm_ok += run_gemm(a, b, KernelConfig::make(Algorithm::SoftwareGemm, p, m, n, k)).c == oracle::software_gemm(a, b);
    }
  }
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(derive_seed(9, "conv", s));
    const Precision p = s % 2 ? Precision::FP16 : Precision::FP32;
    const std::size_t c = 1 + uniform_below(rng, 8), h = 3 + uniform_below(rng, 14), w = 3 + uniform_below(rng, 14);
    const std::size_t k = 1 + uniform_below(rng, 3), stride = 1 + uniform_below(rng, 2), pad = uniform_below(rng, 2);
    const std::size_t out = 1 + uniform_below(rng, 16);
    const nn::Tensor in = nn::Tensor::from_matrix(random_matrix(c, h * w, p, derive_seed(s, "in", 0)), h, w);
    const Matrix weights = random_matrix(out, c * k * k, p, derive_seed(s, "w", 0));
    const Matrix cols = nn::im2col(in, k, k, stride, pad);
    const KernelConfig cfg = KernelConfig::make(Algorithm::SoftwareGemm, p, out, cols.cols, cols.rows);
    conv_ok += run_gemm(weights, cols, cfg).c == oracle::direct_conv(in, weights, k, k, stride, pad);
  }
  return {gemm_ok == 200 && conv_ok == 50, fmt("GEMM %zu/200, conv %zu/50 bit-exact", gemm_ok, conv_ok)};
}

// ---- 10 ---------------------------------------------------------------------
// The same operand element, bit and output position are hit under both
// algorithms: an FP32 operand load feeding output `out` at depth kk.
Verdict tensor_core_masking() {
  constexpr std::size_t dim = 64;
  const Matrix a = random_matrix(dim, dim, Precision::FP32, derive_seed(10, "a", 0));
  const Matrix b = random_matrix(dim, dim, Precision::FP32, derive_seed(10, "b", 0));
  const GemmKernel sw(a, b, KernelConfig::make(Algorithm::SoftwareGemm, Precision::FP32, dim, dim, dim));
  const GemmKernel tc(a, b, KernelConfig::make(Algorithm::TensorCoreGemm, Precision::FP32, dim, dim, dim));
  Rng rng(derive_seed(10, "sites", 0));
  std::size_t masked_sw = 0, masked_tc = 0;
  for (int i = 0; i < 644; ++i) {
    const Coord out{uniform_below(rng, dim), uniform_below(rng, dim)};
    const std::size_t kk = uniform_below(rng, dim);
    const Operand op = uniform_below(rng, 2) ? Operand::B : Operand::A;
    const Word32 mask{1u << uniform_below(rng, 8)};
    for (const GemmKernel* k : {&sw, &tc}) {
      const FaultDescriptor d{FaultModel::SingleBitFlip, locate_operand_load(k->config(), op, out, kk), {mask}, 0};
      const bool masked = k->run(d).c == k->golden().c;
      (k == &sw ? masked_sw : masked_tc) += masked;
    }
  }

  std::size_t tiles_ok = 0;
  Rng trng(derive_seed(10, "tiles", 0));
  for (int t = 0; t < 100; ++t) {
    const Precision outp = t % 2 ? Precision::FP16 : Precision::FP32;
    const oracle::Format of = outp == Precision::FP16 ? oracle::Format::Half : oracle::Format::Single;
    Tile4x4 ta, tb, tcc;
    tcc.precision = outp;
    for (std::size_t e = 0; e < 16; ++e) {
      ta.values[e] = fp::from_double(8.0 * uniform_unit(trng) - 4.0, Precision::FP16);
      tb.values[e] = fp::from_double(8.0 * uniform_unit(trng) - 4.0, Precision::FP16);
      tcc.values[e] = fp::from_double(16.0 * uniform_unit(trng) - 8.0, outp);
    }
    const Tile4x4 d = mma_4x4(ta, tb, tcc, outp);
    bool ok = true;
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        std::uint32_t row[4], col[4];
        for (std::size_t k = 0; k < 4; ++k) {
          row[k] = ta.at(r, k).bits;
          col[k] = tb.at(k, c).bits;
        }
        ok = ok && oracle::mma_element(row, col, tcc.at(r, c).bits, of) == d.at(r, c).bits;
      }
    }
    tiles_ok += ok;
  }
  return {masked_tc >= masked_sw && tiles_ok == 100,
          fmt("masked TC %.3f >= SW %.3f over 644 sites; mma %zu/100 tiles exact", masked_tc / 644.0,
              masked_sw / 644.0, tiles_ok)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "single-bit-flip geometry", single_bit_flip_geometry},
      {2, "FP16 dual corruption", fp16_dual_corruption},
      {3, "warp-wide Square dominance", warp_wide_square},
      {4, "ECC behavioral model", ecc_model},
      {5, "criticality ordering on the reference network", criticality_ordering},
      {6, "geometry classifier oracle equivalence", geometry_oracle},
      {7, "FIT arithmetic", fit_arithmetic},
      {8, "determinism and replay", determinism_and_replay},
      {9, "GEMM correctness oracle", gemm_oracle},
      {10, "tensor-core rounding divergence", tensor_core_masking},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  C%d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
