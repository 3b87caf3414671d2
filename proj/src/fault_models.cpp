#include "warpfault/fault_models.hpp"

#include <bit>
#include <cstdio>
#include <string>

#include "warpfault/errors.hpp"
#include "warpfault/rng.hpp"

namespace warpfault {

std::string_view to_string(FaultModel m) {
  switch (m) {
    case FaultModel::SingleBitFlip: return "SingleBitFlip";
    case FaultModel::DoubleBitFlip: return "DoubleBitFlip";
    case FaultModel::SingleRandomValue: return "SingleRandomValue";
    case FaultModel::WarpRandomValue: return "WarpRandomValue";
    case FaultModel::WarpZeroValue: return "WarpZeroValue";
  }
  return "?";
}

FaultModel parse_fault_model(std::string_view s) {
  for (FaultModel m : kAllFaultModels) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown fault model '" + std::string(s) + "'");
}

bool is_warp_wide(FaultModel m) {
  return m == FaultModel::WarpRandomValue || m == FaultModel::WarpZeroValue;
}

std::string_view to_string(StorageClass s) {
  return s == StorageClass::ProtectedRegister ? "ProtectedRegister" : "UnprotectedDatapath";
}

StorageClass parse_storage_class(std::string_view s) {
  if (s == "ProtectedRegister" || s == "protected") return StorageClass::ProtectedRegister;
  if (s == "UnprotectedDatapath" || s == "unprotected") return StorageClass::UnprotectedDatapath;
  throw ValidationError("unknown storage class '" + std::string(s) + "'");
}

StorageClass default_storage(FaultModel m) {
  return (m == FaultModel::SingleBitFlip || m == FaultModel::DoubleBitFlip)
             ? StorageClass::ProtectedRegister
             : StorageClass::UnprotectedDatapath;
}

std::string_view to_string(EccMode m) { return m == EccMode::Off ? "off" : "secded"; }

EccMode parse_ecc_mode(std::string_view s) {
  if (s == "off" || s == "Off") return EccMode::Off;
  if (s == "secded" || s == "SecDed") return EccMode::SecDed;
  throw ValidationError("unknown ecc mode '" + std::string(s) + "'");
}

bool SiteFilter::accepts(const TraceEntry& e) const {
  if (!e.writes_register || e.active_mask == 0) return false;
  if (!classes.contains(e.reg_class)) return false;
  return opcodes.empty() || opcodes.contains(e.opcode);
}

FaultSite sample_site(std::uint64_t seed, const TraceProfile& profile, FaultModel model,
                      const SiteFilter& filter) {
  const bool warp_wide = is_warp_wide(model);
  auto weight = [&](const TraceEntry& e) -> std::uint64_t {
    if (!filter.accepts(e)) return 0;
    return warp_wide ? 1 : static_cast<std::uint64_t>(std::popcount(e.active_mask));
  };

  std::vector<std::uint64_t> per_warp(profile.kernels.size(), 0);
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < profile.kernels.size(); ++k) {
    for (const auto& e : profile.kernels[k].instructions) per_warp[k] += weight(e);
    total += per_warp[k] * profile.kernels[k].warps;
  }
  if (total == 0) throw NoSites("no injectable sites match the requested register classes");

  Rng rng(seed);
  std::uint64_t r = uniform_below(rng, total);
  std::size_t k = 0;
  while (r >= per_warp[k] * profile.kernels[k].warps) {
    r -= per_warp[k] * profile.kernels[k].warps;
    ++k;
  }
  FaultSite site;
  site.kernel = k;
  site.warp = r / per_warp[k];
  r %= per_warp[k];
  const auto& stream = profile.kernels[k].instructions;
  std::uint64_t t = 0;
  for (;; ++t) {
    const std::uint64_t w = weight(stream[t]);
    if (r < w) break;
    r -= w;
  }
  site.dyn_inst = t;
  site.reg_class = stream[t].reg_class;
  site.storage_class = default_storage(model);
  if (warp_wide) {
    site.lane = kAllLanes;
  } else {
    std::uint32_t mask = stream[t].active_mask;
    for (std::uint64_t skip = 0; skip < r; ++skip) mask &= mask - 1;
    site.lane = std::countr_zero(mask);
  }
  return site;
}

FaultDescriptor make_descriptor(FaultModel model, const FaultSite& site, std::uint64_t seed) {
  FaultDescriptor d{model, site, {}, seed};
  Rng rng(mix64(seed));
  switch (model) {
    case FaultModel::SingleBitFlip:
      d.payload.push_back({1u << uniform_below(rng, 32)});
      break;
    case FaultModel::DoubleBitFlip: {
      const auto first = uniform_below(rng, 32);
      auto second = uniform_below(rng, 31);
      if (second >= first) ++second;
      d.payload.push_back({(1u << first) | (1u << second)});
      break;
    }
    case FaultModel::SingleRandomValue:
      d.payload.push_back({static_cast<std::uint32_t>(rng())});
      break;
    case FaultModel::WarpRandomValue:
      // Independent payload per lane.
      for (int lane = 0; lane < kWarpSize; ++lane) d.payload.push_back({static_cast<std::uint32_t>(rng())});
      break;
    case FaultModel::WarpZeroValue:
      break;
  }
  return d;
}

void validate(const FaultDescriptor& d) {
  const bool warp_wide = is_warp_wide(d.model);
  require(warp_wide == (d.site.lane == kAllLanes),
          std::string("lane must be ALL exactly for warp-wide models (") + std::string(to_string(d.model)) + ")");
  require(warp_wide || (d.site.lane >= 0 && d.site.lane < kWarpSize), "lane outside [0,31]");
  switch (d.model) {
    case FaultModel::SingleBitFlip:
      require(d.payload.size() == 1 && std::popcount(d.payload[0].bits) == 1,
              "SingleBitFlip payload must be one single-bit mask");
      break;
    case FaultModel::DoubleBitFlip:
      require(d.payload.size() == 1 && std::popcount(d.payload[0].bits) == 2,
              "DoubleBitFlip payload must be one two-bit mask");
      break;
    case FaultModel::SingleRandomValue:
      require(d.payload.size() == 1, "SingleRandomValue payload must hold one word");
      break;
    case FaultModel::WarpRandomValue:
      require(d.payload.size() == kWarpSize, "WarpRandomValue payload must hold 32 words");
      break;
    case FaultModel::WarpZeroValue:
      require(d.payload.empty(), "WarpZeroValue carries no payload");
      break;
  }
}

std::vector<int> flipped_bits(const FaultDescriptor& d) {
  std::vector<int> bits;
  if (d.model != FaultModel::SingleBitFlip && d.model != FaultModel::DoubleBitFlip) return bits;
  for (std::uint32_t mask = d.payload.at(0).bits; mask; mask &= mask - 1) {
    bits.push_back(std::countr_zero(mask));
  }
  return bits;
}

void apply_fault(std::span<Word32, kWarpSize> lanes, std::uint32_t active_mask, const FaultDescriptor& d) {
  validate(d);
  if (!is_warp_wide(d.model)) {
    const auto lane = static_cast<std::size_t>(d.site.lane);
    if (!(active_mask & (1u << lane))) {
      throw InvalidSite("lane " + std::to_string(lane) + " is inactive at the fault instruction");
    }
    Word32& w = lanes[lane];
    if (d.model == FaultModel::SingleRandomValue) {
      w = d.payload[0];
    } else {
      const auto bits = flipped_bits(d);
      w = flip_bits(w, std::span<const int>(bits));
    }
    return;
  }
  for (std::size_t lane = 0; lane < kWarpSize; ++lane) {
    if (!(active_mask & (1u << lane))) continue;
    lanes[lane] = d.model == FaultModel::WarpZeroValue ? Word32{0} : d.payload[lane];
  }
}

std::array<Word32, kWarpSize> apply_fault(const std::array<Word32, kWarpSize>& clean,
                                          std::uint32_t active_mask, const FaultDescriptor& d) {
  auto out = clean;
  apply_fault(std::span<Word32, kWarpSize>(out), active_mask, d);
  return out;
}

EccVerdict ecc_filter(const FaultSite& site, FaultModel model, EccMode mode) {
  if (mode == EccMode::Off || site.storage_class != StorageClass::ProtectedRegister) return EccVerdict::Pass;
  switch (model) {
    case FaultModel::SingleBitFlip: return EccVerdict::Corrected;
    case FaultModel::DoubleBitFlip: return EccVerdict::DueDoubleBit;
    default: return EccVerdict::Pass;  // value replacement is not a storage upset
  }
}

namespace {

std::string hex_word(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::uint32_t parse_hex_word(const std::string& s) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used, 16);
  } catch (const std::exception&) {
    throw ValidationError("bad payload word '" + s + "'");
  }
  if (used != s.size() || v > 0xFFFFFFFFul) throw ValidationError("bad payload word '" + s + "'");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

nlohmann::json descriptor_to_json(const FaultDescriptor& d) {
  nlohmann::json payload = nlohmann::json::array();
  for (Word32 w : d.payload) payload.push_back(hex_word(w.bits));
  nlohmann::json j;
  j["model"] = to_string(d.model);
  j["kernel"] = d.site.kernel;
  j["warp"] = d.site.warp;
  if (d.site.lane == kAllLanes) {
    j["lane"] = "ALL";
  } else {
    j["lane"] = d.site.lane;
  }
  j["dyn_inst"] = d.site.dyn_inst;
  j["reg_class"] = to_string(d.site.reg_class);
  j["storage_class"] = to_string(d.site.storage_class);
  j["payload_hex"] = std::move(payload);
  j["seed"] = d.seed;
  return j;
}

FaultDescriptor descriptor_from_json(const nlohmann::json& j) {
  try {
    FaultDescriptor d;
    d.model = parse_fault_model(j.at("model").get<std::string>());
    d.site.kernel = j.at("kernel").get<std::size_t>();
    d.site.warp = j.at("warp").get<std::size_t>();
    const auto& lane = j.at("lane");
    d.site.lane = lane.is_string() && lane.get<std::string>() == "ALL" ? kAllLanes : lane.get<int>();
    d.site.dyn_inst = j.at("dyn_inst").get<std::uint64_t>();
    d.site.reg_class = parse_register_class(j.at("reg_class").get<std::string>());
    d.site.storage_class = parse_storage_class(j.at("storage_class").get<std::string>());
    for (const auto& w : j.at("payload_hex")) d.payload.push_back({parse_hex_word(w.get<std::string>())});
    d.seed = j.at("seed").get<std::uint64_t>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed fault descriptor: ") + e.what());
  }
}

}  // namespace warpfault
