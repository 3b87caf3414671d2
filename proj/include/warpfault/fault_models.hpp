#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "warpfault/numerics.hpp"
#include "warpfault/simt_types.hpp"

namespace warpfault {

enum class FaultModel : std::uint8_t {
  SingleBitFlip,
  DoubleBitFlip,
  SingleRandomValue,
  WarpRandomValue,
  WarpZeroValue,
};

inline constexpr std::array<FaultModel, 5> kAllFaultModels{
    FaultModel::SingleBitFlip, FaultModel::DoubleBitFlip, FaultModel::SingleRandomValue,
    FaultModel::WarpRandomValue, FaultModel::WarpZeroValue};

std::string_view to_string(FaultModel m);
FaultModel parse_fault_model(std::string_view s);
bool is_warp_wide(FaultModel m);

enum class StorageClass : std::uint8_t { ProtectedRegister, UnprotectedDatapath };

std::string_view to_string(StorageClass s);
StorageClass parse_storage_class(std::string_view s);

/// Bit flips originate in ECC-protected storage; value replacements in the
/// scheduler and functional units.
StorageClass default_storage(FaultModel m);

enum class EccMode : std::uint8_t { Off, SecDed };
enum class EccVerdict : std::uint8_t { Pass, Corrected, DueDoubleBit };

std::string_view to_string(EccMode m);
EccMode parse_ecc_mode(std::string_view s);

inline constexpr int kAllLanes = -1;

struct FaultSite {
  std::size_t kernel = 0;
  std::size_t warp = 0;
  int lane = 0;  // kAllLanes for warp-wide models
  std::uint64_t dyn_inst = 0;
  RegisterClass reg_class = RegisterClass::ArithmeticDest;
  StorageClass storage_class = StorageClass::UnprotectedDatapath;

  bool operator==(const FaultSite&) const = default;
};

/// Everything needed to replay one injection. Bit-flip payloads are a single
/// XOR mask word; random-value payloads hold one word per affected lane.
struct FaultDescriptor {
  FaultModel model = FaultModel::SingleBitFlip;
  FaultSite site;
  std::vector<Word32> payload;
  std::uint64_t seed = 0;

  bool operator==(const FaultDescriptor&) const = default;
};

/// Restricts site sampling. An empty opcode set accepts every opcode.
struct SiteFilter {
  std::set<RegisterClass> classes{RegisterClass::ArithmeticDest};
  std::set<Opcode> opcodes;

  bool accepts(const TraceEntry& e) const;
};

/// Uniform over (kernel, warp, lane, dynamic instruction) among register
/// writes accepted by `filter`. Warp-wide models sample (kernel, warp,
/// instruction) and report lane = kAllLanes. Throws NoSites.
FaultSite sample_site(std::uint64_t seed, const TraceProfile& profile, FaultModel model,
                      const SiteFilter& filter);

/// Builds the payload for `model` from `seed`; storage class of the site is kept.
FaultDescriptor make_descriptor(FaultModel model, const FaultSite& site, std::uint64_t seed);

/// Throws ContractViolation when payload and model disagree.
void validate(const FaultDescriptor& d);

std::vector<int> flipped_bits(const FaultDescriptor& d);

/// Mutates the destination words of a warp. `lanes` holds the clean value of
/// every lane; only lanes the model targets (and that are active) change.
void apply_fault(std::span<Word32, kWarpSize> lanes, std::uint32_t active_mask,
                 const FaultDescriptor& d);
std::array<Word32, kWarpSize> apply_fault(const std::array<Word32, kWarpSize>& clean,
                                          std::uint32_t active_mask, const FaultDescriptor& d);

EccVerdict ecc_filter(const FaultSite& site, FaultModel model, EccMode mode);

/// One JSON object: {model, kernel, warp, lane, dyn_inst, reg_class,
/// storage_class, payload_hex[], seed}.
nlohmann::json descriptor_to_json(const FaultDescriptor& d);
FaultDescriptor descriptor_from_json(const nlohmann::json& j);

}  // namespace warpfault
