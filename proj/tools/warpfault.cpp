// Command-line front end: run, replay, report, gen-assets.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "warpfault/campaign.hpp"
#include "warpfault/errors.hpp"
#include "warpfault/nn.hpp"

namespace fs = std::filesystem;
using namespace warpfault;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitAnomaly = 2;

int cmd_run(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<unsigned> workers,
            const fs::path& out_dir, bool resume) {
  CampaignConfig config = load_config(config_path);
  if (seed) config.seed = *seed;
  if (workers) config.workers = *workers;
  validate(config);
  fs::create_directories(out_dir);
  RunOptions options;
  options.log_path = out_dir / "campaign.jsonl";
  options.resume = resume;
  const CampaignResult result = run_campaign(config, options);

  if (!result.stats.empty()) {
    for (auto [format, name] : {std::pair{ReportFormat::Json, "report.json"}, std::pair{ReportFormat::Csv, "report.csv"},
                                std::pair{ReportFormat::Markdown, "summary.md"}}) {
      std::ofstream(out_dir / name) << report(result.stats, format, config.fit);
    }
    std::cout << report(result.stats, ReportFormat::Markdown, config.fit);
  }
  std::cout << "\n" << result.log.records.size() << " records written to " << options.log_path->string() << "\n";
  if (result.anomalies > 0) {
    std::cerr << result.anomalies << " injections ended in an internal anomaly; see the log\n";
    return kExitAnomaly;
  }
  return kExitOk;
}

int cmd_replay(const fs::path& log_path, std::optional<std::uint64_t> record) {
  const CampaignLog log = read_log(log_path);
  check_compatible(log.header);
  const CampaignConfig config = config_from_json(log.header.config);
  const auto target = make_target(config);
  std::size_t matched = 0, total = 0;
  auto show = [](const std::optional<Outcome>& o) { return o ? describe(*o) : std::string("anomaly"); };
  for (const LogRecord& r : log.records) {
    if (record && r.index != *record) continue;
    const ReplayResult res = replay(log, *target, r.index);
    ++total;
    matched += res.match ? 1 : 0;
    if (!res.match || record) {
      std::cout << "record " << r.index << ": recorded " << show(res.recorded) << ", replayed " << show(res.reproduced)
                << (res.error.empty() ? "" : " (" + res.error + ")") << (res.match ? "  match" : "  MISMATCH")
                << "\n";
    }
  }
  if (record && total == 0) throw ValidationError("log has no record " + std::to_string(*record));
  std::cout << matched << "/" << total << " records reproduced\n";
  return matched == total ? kExitOk : kExitAnomaly;
}

int cmd_report(const fs::path& log_path, const std::string& format) {
  const CampaignLog log = read_log(log_path);
  check_compatible(log.header);
  const CampaignConfig config = config_from_json(log.header.config);
  std::cout << report(compute_stats(log), parse_report_format(format), config.fit);
  return kExitOk;
}

int cmd_gen_assets(const fs::path& out_dir) {
  fs::create_directories(out_dir / "frames");
  nn::save_network(out_dir / "reference.wfnn", nn::reference_network());
  const auto frames = nn::reference_frames();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%02zu.wfmx", i);
    nn::save_frame(out_dir / "frames" / name, frames[i]);
  }
  // Golden detections of every frame under each kernel variant, for reference.
  const auto net = nn::reference_network();
  nlohmann::json golden = nlohmann::json::object();
  for (Algorithm alg : {Algorithm::SoftwareGemm, Algorithm::TensorCoreGemm}) {
    for (Precision p : {Precision::FP32, Precision::FP16}) {
      nn::InferenceOptions options;
      options.algorithm = alg;
      options.precision = p;
      nlohmann::json per_frame = nlohmann::json::array();
      for (const nn::Tensor& f : frames) per_frame.push_back(nn::detections_to_json(nn::infer(net, f, options).detections));
      golden[std::string(to_string(alg)) + "/" + std::string(to_string(p))] = per_frame;
    }
  }
  std::ofstream(out_dir / "golden_detections.json") << golden.dump(1) << "\n";
  std::cout << "wrote " << (out_dir / "reference.wfnn").string() << ", " << frames.size()
            << " frames and golden_detections.json\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic SIMT fault-injection simulator"};
  app.require_subcommand(1);

  fs::path config_path, out_dir = "campaign_out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool resume = false;
  auto* run = app.add_subcommand("run", "Run an injection campaign");
  run->add_option("config", config_path, "Campaign config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--workers", workers, "Worker threads (results do not depend on it)");
  run->add_option("--out", out_dir, "Output directory for the log and reports");
  run->add_flag("--resume", resume, "Continue an interrupted log in --out");

  fs::path log_path;
  std::optional<std::uint64_t> record;
  auto* rep = app.add_subcommand("replay", "Re-execute logged injections and compare outcomes");
  rep->add_option("log", log_path, "Campaign log (JSON lines)")->required()->check(CLI::ExistingFile);
  rep->add_option("--record", record, "Replay only this record index");

  std::string format = "markdown";
  auto* rpt = app.add_subcommand("report", "Summarize a campaign log");
  rpt->add_option("log", log_path, "Campaign log (JSON lines)")->required()->check(CLI::ExistingFile);
  rpt->add_option("--format", format, "json, csv or markdown")->check(CLI::IsMember({"json", "csv", "markdown", "md"}));

  fs::path assets_dir = "assets";
  auto* gen = app.add_subcommand("gen-assets", "Write the reference network and frames");
  gen->add_option("--out", assets_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, seed, workers, out_dir, resume);
    if (*rep) return cmd_replay(log_path, record);
    if (*rpt) return cmd_report(log_path, format);
    if (*gen) return cmd_gen_assets(assets_dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IncompatibleLog& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitAnomaly;
  }
  return kExitOk;
}
