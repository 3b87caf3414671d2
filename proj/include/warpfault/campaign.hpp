#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "warpfault/analysis.hpp"
#include "warpfault/fault_models.hpp"
#include "warpfault/nn.hpp"
#include "warpfault/simt.hpp"

namespace warpfault {

inline constexpr std::string_view kToolName = "warpfault";
inline constexpr std::string_view kToolVersion = "1.0.0";

// ---- configuration ---------------------------------------------------------

enum class TargetKind : std::uint8_t { Gemm, Network };

struct GemmTarget {
  Algorithm algorithm = Algorithm::SoftwareGemm;
  Precision precision = Precision::FP32;
  std::size_t m = 256, n = 256, k = 256;
  std::uint64_t input_seed = 1;  // A and B are random_matrix(..., input_seed / +1)
};

struct NetworkTarget {
  Algorithm algorithm = Algorithm::SoftwareGemm;
  Precision precision = Precision::FP32;
  std::filesystem::path network;  // empty: built-in reference network
  std::filesystem::path frames;   // empty: built-in reference frames
  std::size_t frame_count = nn::kReferenceFrameCount;
};

/// Parsed campaign config. See README for the file format.
struct CampaignConfig {
  TargetKind kind = TargetKind::Gemm;
  GemmTarget gemm;
  NetworkTarget network;

  // Injection counts in kAllFaultModels order; models with count 0 are skipped.
  std::map<FaultModel, std::uint64_t> mix;
  SiteFilter filter;
  std::map<FaultModel, StorageClass> storage;  // overrides default_storage()
  EccMode ecc = EccMode::Off;

  std::uint64_t seed = 1;
  unsigned workers = 1;

  double square_density = kDefaultSquareDensity;
  nn::DetectionThresholds thresholds;
  std::optional<FitParams> fit;

  std::uint64_t total_injections() const;
  StorageClass storage_for(FaultModel m) const;
};

/// INI-style text. Relative paths resolve against `base_dir`. Throws ValidationError.
CampaignConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
CampaignConfig load_config(const std::filesystem::path& path);
void validate(const CampaignConfig& config);

/// Canonical JSON form. `workers` is left out: it never changes results.
nlohmann::json config_to_json(const CampaignConfig& config);
CampaignConfig config_from_json(const nlohmann::json& j);
/// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const CampaignConfig& config);

// ---- log -------------------------------------------------------------------

struct LogHeader {
  std::string tool = std::string(kToolName);
  std::string tool_version = std::string(kToolVersion);
  std::uint64_t config_hash = 0;
  nlohmann::json config;
};

struct LogRecord {
  std::uint64_t index = 0;
  FaultModel model = FaultModel::SingleBitFlip;
  std::uint64_t model_index = 0;  // i within the model's share of the mix
  std::size_t frame = 0;          // network targets only
  FaultDescriptor descriptor;
  std::optional<Outcome> outcome;  // empty on anomaly
  std::size_t corrupted = 0;       // corrupted elements of the targeted GEMM output
  std::uint64_t instructions = 0;  // executed by the faulted warp
  std::string anomaly;

  bool operator==(const LogRecord&) const = default;
};

struct CampaignLog {
  LogHeader header;
  std::vector<LogRecord> records;
};

nlohmann::json header_to_json(const LogHeader& h);
nlohmann::json record_to_json(const LogRecord& r);
LogRecord record_from_json(const nlohmann::json& j);
nlohmann::json outcome_to_json(const Outcome& o);
Outcome outcome_from_json(const nlohmann::json& j);

/// JSON lines: header first, then one record per line in index order.
void write_log(std::ostream& out, const CampaignLog& log);
CampaignLog read_log(std::istream& in);
CampaignLog read_log(const std::filesystem::path& path);

/// Throws IncompatibleLog unless the log came from this tool with the same major version.
void check_compatible(const LogHeader& header);

// ---- execution -------------------------------------------------------------

/// Golden state of a campaign target; evaluates single injections. Thread safe.
/// One target serves every config that shares its golden inputs (target
/// section, and for networks the decode thresholds); ECC mode, square
/// density and matching thresholds are read from the config per call.
class Target {
 public:
  virtual ~Target() = default;
  virtual const TraceProfile& profile() const = 0;
  virtual std::size_t frames() const = 0;
  /// False when `config` needs a different golden run.
  virtual bool serves(const CampaignConfig& config) const = 0;

  struct Evaluation {
    Outcome outcome;
    std::size_t corrupted = 0;
    std::uint64_t instructions = 0;
  };
  /// ECC filter, execution, diff, geometry and (for networks) criticality.
  virtual Evaluation evaluate(const FaultDescriptor& d, std::size_t frame, const CampaignConfig& config) const = 0;
};

std::unique_ptr<Target> make_target(const CampaignConfig& config);

/// Seed of injection i of `model`: derive_seed(master, model name, i).
std::uint64_t injection_seed(std::uint64_t master, FaultModel model, std::uint64_t i);

/// Builds (without evaluating) record `index` of the campaign.
LogRecord plan_record(const CampaignConfig& config, const Target& target, std::uint64_t index);

using NamedStats = std::vector<std::pair<std::string, CampaignStats>>;

/// One entry per model present in the log (kAllFaultModels order) plus
/// "Overall", the pooled counts of every record. Anomalous records are not counted.
NamedStats compute_stats(const CampaignLog& log);

struct RunOptions {
  std::optional<std::filesystem::path> log_path;  // write JSON lines here, flushed per record
  bool resume = false;                            // continue an existing log at log_path
};

struct CampaignResult {
  CampaignLog log;
  NamedStats stats;
  std::size_t anomalies = 0;
};

CampaignResult run_campaign(const CampaignConfig& config, const RunOptions& options = {});
/// Same as above with a prebuilt target (tests reuse one golden across runs).
/// Throws ContractViolation unless target.serves(config).
CampaignResult run_campaign(const CampaignConfig& config, const Target& target, const RunOptions& options = {});

struct ReplayResult {
  std::optional<Outcome> recorded;
  std::optional<Outcome> reproduced;
  std::string error;  // set when the record could not be re-executed
  bool match = false;
};

ReplayResult replay(const CampaignLog& log, std::uint64_t index);
ReplayResult replay(const CampaignLog& log, const Target& target, std::uint64_t index);

// ---- reports ---------------------------------------------------------------

enum class ReportFormat : std::uint8_t { Json, Csv, Markdown };
ReportFormat parse_report_format(std::string_view s);

/// Fixed class list of the CSV report, one row per (config, class).
const std::vector<std::string>& report_classes();

/// Throws ValidationError when `stats` is empty or any entry has no injections.
std::string report(const NamedStats& stats, ReportFormat format, const std::optional<FitParams>& fit = std::nullopt);

}  // namespace warpfault
