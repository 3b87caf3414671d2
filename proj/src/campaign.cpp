#include "warpfault/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "warpfault/errors.hpp"
#include "warpfault/rng.hpp"

namespace warpfault {

// ---- outcome / record serialization ----------------------------------------

nlohmann::json outcome_to_json(const Outcome& o) {
  if (std::holds_alternative<Masked>(o)) return {{"class", "Masked"}};
  if (const auto* s = std::get_if<Sdc>(&o)) {
    nlohmann::json j{{"class", "SDC"}, {"geometry", std::string(to_string(s->geometry))}};
    if (s->criticality) j["criticality"] = std::string(to_string(*s->criticality));
    return j;
  }
  return {{"class", "DUE"}, {"reason", std::string(to_string(std::get<Due>(o).reason))}};
}

Outcome outcome_from_json(const nlohmann::json& j) {
  const std::string cls = j.at("class").get<std::string>();
  if (cls == "Masked") return Masked{};
  if (cls == "SDC") {
    Sdc s{parse_geometry(j.at("geometry").get<std::string>()), std::nullopt};
    if (j.contains("criticality")) s.criticality = parse_criticality(j["criticality"].get<std::string>());
    return s;
  }
  if (cls == "DUE") return Due{parse_due_reason(j.at("reason").get<std::string>())};
  throw ValidationError("unknown outcome class '" + cls + "'");
}

nlohmann::json header_to_json(const LogHeader& h) {
  char hash[19];
  std::snprintf(hash, sizeof hash, "0x%016llx", static_cast<unsigned long long>(h.config_hash));
  return {{"type", "header"}, {"tool", h.tool}, {"tool_version", h.tool_version}, {"config_hash", hash},
          {"config", h.config}};
}

namespace {

LogHeader header_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "header") throw ValidationError("campaign log does not start with a header");
  LogHeader h;
  h.tool = j.at("tool").get<std::string>();
  h.tool_version = j.at("tool_version").get<std::string>();
  h.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  h.config = j.at("config");
  return h;
}

}  // namespace

nlohmann::json record_to_json(const LogRecord& r) {
  nlohmann::json j{{"type", "record"},
                   {"index", r.index},
                   {"model", std::string(to_string(r.model))},
                   {"model_index", r.model_index},
                   {"frame", r.frame},
                   {"descriptor", descriptor_to_json(r.descriptor)}};
  if (r.outcome) {
    j["outcome"] = outcome_to_json(*r.outcome);
  } else {
    j["outcome"] = nullptr;
  }
  j["corrupted"] = r.corrupted;
  j["timing"] = {{"instructions", r.instructions}};
  if (!r.anomaly.empty()) j["anomaly"] = r.anomaly;
  return j;
}

LogRecord record_from_json(const nlohmann::json& j) {
  try {
    LogRecord r;
    r.index = j.at("index").get<std::uint64_t>();
    r.model = parse_fault_model(j.at("model").get<std::string>());
    r.model_index = j.at("model_index").get<std::uint64_t>();
    r.frame = j.at("frame").get<std::size_t>();
    r.descriptor = descriptor_from_json(j.at("descriptor"));
    if (!j.at("outcome").is_null()) r.outcome = outcome_from_json(j["outcome"]);
    r.corrupted = j.at("corrupted").get<std::size_t>();
    r.instructions = j.at("timing").at("instructions").get<std::uint64_t>();
    r.anomaly = j.value("anomaly", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed log record: ") + e.what());
  }
}

void write_log(std::ostream& out, const CampaignLog& log) {
  out << header_to_json(log.header).dump() << '\n';
  for (const LogRecord& r : log.records) out << record_to_json(r).dump() << '\n';
}

CampaignLog read_log(std::istream& in) {
  CampaignLog log;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("campaign log line is not JSON: ") + e.what());
    }
    if (!have_header) {
      log.header = header_from_json(j);
      have_header = true;
    } else {
      log.records.push_back(record_from_json(j));
    }
  }
  if (!have_header) throw ValidationError("campaign log is empty");
  return log;
}

CampaignLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open log " + path.string());
  return read_log(in);
}

void check_compatible(const LogHeader& header) {
  const auto major = [](std::string_view v) { return v.substr(0, v.find('.')); };
  if (header.tool != kToolName || major(header.tool_version) != major(kToolVersion)) {
    throw IncompatibleLog("log written by " + header.tool + " " + header.tool_version + ", this is " +
                          std::string(kToolName) + " " + std::string(kToolVersion));
  }
}

// ---- targets ---------------------------------------------------------------

namespace {

Outcome ecc_outcome(EccVerdict v) {
  return v == EccVerdict::Corrected ? Outcome{Masked{}} : Outcome{Due{DueReason::EccDoubleBit}};
}

Outcome status_outcome(ExecStatus s) { return Due{s == ExecStatus::Hang ? DueReason::Hang : DueReason::Crash}; }

// Config fields that determine the golden run.
std::string golden_key(const CampaignConfig& c) {
  const nlohmann::json full = config_to_json(c);
  nlohmann::json key{{"target", full.at("target")}};
  if (c.kind == TargetKind::Network) {
    key["confidence"] = c.thresholds.confidence;
    key["nms_iou"] = c.thresholds.nms_iou;
  }
  return key.dump();
}

class GemmCampaignTarget final : public Target {
 public:
  explicit GemmCampaignTarget(const CampaignConfig& c)
      : key_(golden_key(c)),
        kernel_(random_matrix(c.gemm.m, c.gemm.k, c.gemm.precision, derive_seed(c.gemm.input_seed, "gemm.a", 0)),
                random_matrix(c.gemm.k, c.gemm.n, c.gemm.precision, derive_seed(c.gemm.input_seed, "gemm.b", 0)),
                KernelConfig::make(c.gemm.algorithm, c.gemm.precision, c.gemm.m, c.gemm.n, c.gemm.k)) {
    profile_.kernels.push_back(kernel_.trace());
  }

  const TraceProfile& profile() const override { return profile_; }
  std::size_t frames() const override { return 1; }

  bool serves(const CampaignConfig& c) const override { return golden_key(c) == key_; }

  Evaluation evaluate(const FaultDescriptor& d, std::size_t, const CampaignConfig& config) const override {
    Evaluation e;
    const EccVerdict v = ecc_filter(d.site, d.model, config.ecc);
    if (v != EccVerdict::Pass) {
      e.outcome = ecc_outcome(v);
      return e;
    }
    if (d.site.kernel != 0) throw InvalidSite("GEMM target has a single kernel");
    const GemmResult r = kernel_.run(d);
    e.instructions = r.warp_instructions.at(d.site.warp);
    if (r.status != ExecStatus::Completed) {
      e.outcome = status_outcome(r.status);
      return e;
    }
    const Diff delta = diff(kernel_.golden().c, r.c);
    e.corrupted = delta.size();
    if (delta.empty()) {
      e.outcome = Masked{};
    } else {
      e.outcome = Sdc{classify_geometry(delta, config.square_density), std::nullopt};
    }
    return e;
  }

 private:
  std::string key_;
  GemmKernel kernel_;
  TraceProfile profile_;
};

std::vector<nn::Tensor> load_frames(const NetworkTarget& t, const nn::NetworkSpec& net) {
  if (t.frames.empty()) return nn::reference_frames(t.frame_count);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(t.frames)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wfmx") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < t.frame_count) {
    throw ValidationError(t.frames.string() + ": expected " + std::to_string(t.frame_count) + " frames, found " +
                          std::to_string(files.size()));
  }
  std::vector<nn::Tensor> frames;
  for (std::size_t i = 0; i < t.frame_count; ++i) {
    nn::Tensor f = nn::load_frame(files[i], net.in_height, net.in_width);
    if (f.channels != net.in_channels) throw ValidationError(files[i].string() + ": channel count mismatch");
    frames.push_back(std::move(f));
  }
  return frames;
}

class NetworkCampaignTarget final : public Target {
 public:
  explicit NetworkCampaignTarget(const CampaignConfig& c) : key_(golden_key(c)) {
    auto net = std::make_shared<const nn::NetworkSpec>(c.network.network.empty() ? nn::reference_network()
                                                                                 : nn::load_network(c.network.network));
    nn::InferenceOptions options;
    options.precision = c.network.precision;
    options.algorithm = c.network.algorithm;
    options.thresholds = c.thresholds;
    profile_ = nn::network_profile(*net, options);
    for (const nn::Tensor& frame : load_frames(c.network, *net)) sessions_.emplace_back(net, frame, options);
  }

  const TraceProfile& profile() const override { return profile_; }
  std::size_t frames() const override { return sessions_.size(); }

  bool serves(const CampaignConfig& c) const override { return golden_key(c) == key_; }

  Evaluation evaluate(const FaultDescriptor& d, std::size_t frame, const CampaignConfig& config) const override {
    Evaluation e;
    const EccVerdict v = ecc_filter(d.site, d.model, config.ecc);
    if (v != EccVerdict::Pass) {
      e.outcome = ecc_outcome(v);
      return e;
    }
    const nn::InferenceSession& session = sessions_.at(frame);
    const nn::InferenceSession::Run run = session.run(d);
    e.instructions = run.layer_instructions;
    if (run.result.status != ExecStatus::Completed) {
      e.outcome = status_outcome(run.result.status);
      return e;
    }
    e.corrupted = run.layer_diff.size();
    if (run.result.raw.data == session.golden().raw.data) {
      e.outcome = Masked{};
      return e;
    }
    e.outcome = Sdc{classify_geometry(run.layer_diff, config.square_density),
                    nn::classify_criticality(session.golden().detections, run.result.detections,
                                             config.thresholds.match_iou, config.thresholds.tolerable_iou)};
    return e;
  }

 private:
  std::string key_;
  TraceProfile profile_;
  std::vector<nn::InferenceSession> sessions_;
};

}  // namespace

std::unique_ptr<Target> make_target(const CampaignConfig& config) {
  validate(config);
  if (config.kind == TargetKind::Gemm) return std::make_unique<GemmCampaignTarget>(config);
  return std::make_unique<NetworkCampaignTarget>(config);
}

// ---- planning --------------------------------------------------------------

std::uint64_t injection_seed(std::uint64_t master, FaultModel model, std::uint64_t i) {
  return derive_seed(master, to_string(model), i);
}

LogRecord plan_record(const CampaignConfig& config, const Target& target, std::uint64_t index) {
  LogRecord r;
  r.index = index;
  std::uint64_t rest = index;
  bool found = false;
  for (FaultModel m : kAllFaultModels) {
    const auto it = config.mix.find(m);
    const std::uint64_t count = it == config.mix.end() ? 0 : it->second;
    if (rest < count) {
      r.model = m;
      r.model_index = rest;
      found = true;
      break;
    }
    rest -= count;
  }
  require(found, "record index beyond the configured mix");
  const std::uint64_t seed = injection_seed(config.seed, r.model, r.model_index);
  r.frame = static_cast<std::size_t>(r.model_index % target.frames());
  FaultSite site = sample_site(derive_seed(seed, "site", 0), target.profile(), r.model, config.filter);
  site.storage_class = config.storage_for(r.model);
  r.descriptor = make_descriptor(r.model, site, seed);
  return r;
}

namespace {

LogRecord execute(const CampaignConfig& config, const Target& target, std::uint64_t index) {
  LogRecord r;
  try {
    r = plan_record(config, target, index);
    const Target::Evaluation e = target.evaluate(r.descriptor, r.frame, config);
    r.outcome = e.outcome;
    r.corrupted = e.corrupted;
    r.instructions = e.instructions;
  } catch (const std::exception& ex) {
    r.index = index;
    r.outcome.reset();
    r.anomaly = ex.what();
  }
  return r;
}

// Reads the complete records of an interrupted log. A torn trailing line is dropped.
std::vector<LogRecord> recover_records(const std::filesystem::path& path, std::uint64_t expected_hash) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open log " + path.string() + " for resume");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("cannot resume from an empty log");
  LogHeader h;
  try {
    h = header_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("log header is unreadable");
  }
  check_compatible(h);
  if (h.config_hash != expected_hash) throw ValidationError("log was written for a different config");
  std::vector<LogRecord> records;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: the line may be torn
    try {
      LogRecord r = record_from_json(nlohmann::json::parse(line));
      if (r.index != records.size()) break;
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      break;
    }
  }
  return records;
}

}  // namespace

NamedStats compute_stats(const CampaignLog& log) {
  std::map<FaultModel, CampaignStats> per_model;
  CampaignStats overall;
  for (const LogRecord& r : log.records) {
    if (!r.outcome) continue;
    per_model[r.model].add(*r.outcome);
    overall.add(*r.outcome);
  }
  NamedStats out;
  for (FaultModel m : kAllFaultModels) {
    if (const auto it = per_model.find(m); it != per_model.end()) out.emplace_back(std::string(to_string(m)), it->second);
  }
  if (!per_model.empty()) out.emplace_back("Overall", overall);
  return out;
}

CampaignResult run_campaign(const CampaignConfig& config, const RunOptions& options) {
  validate(config);
  const auto target = make_target(config);
  return run_campaign(config, *target, options);
}

CampaignResult run_campaign(const CampaignConfig& config, const Target& target, const RunOptions& options) {
  validate(config);
  require(target.serves(config), "target was built for a different golden configuration");
  // Empty site populations are a config problem; report them before running anything.
  for (const auto& [model, count] : config.mix) {
    if (count == 0) continue;
    try {
      sample_site(0, target.profile(), model, config.filter);
    } catch (const NoSites& e) {
      throw ValidationError(std::string(to_string(model)) + ": " + e.what());
    }
  }

  CampaignResult result;
  const std::uint64_t hash = config_hash(config);
  result.log.header.config_hash = hash;
  result.log.header.config = config_to_json(config);
  const std::uint64_t total = config.total_injections();

  std::ofstream out;
  if (options.log_path) {
    if (options.resume && std::filesystem::exists(*options.log_path)) {
      result.log.records = recover_records(*options.log_path, hash);
      if (result.log.records.size() > total) throw ValidationError("log holds more records than the config");
      // Rewrite the recovered prefix so a torn tail disappears.
      std::ofstream rewrite(*options.log_path, std::ios::trunc);
      write_log(rewrite, result.log);
      if (!rewrite) throw std::runtime_error("cannot rewrite " + options.log_path->string());
      rewrite.close();
      out.open(*options.log_path, std::ios::app);
    } else {
      out.open(*options.log_path, std::ios::trunc);
      out << header_to_json(result.log.header).dump() << '\n';
      out.flush();
    }
    if (!out) throw std::runtime_error("cannot write " + options.log_path->string());
  }

  const std::uint64_t start = result.log.records.size();
  const std::uint64_t pending = total - start;
  std::vector<std::optional<LogRecord>> slots(pending);
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::uint64_t> next{0};

  auto worker = [&] {
    for (std::uint64_t i = next++; i < pending; i = next++) {
      LogRecord r = execute(config, target, start + i);
      {
        std::lock_guard lock(mutex);
        slots[i] = std::move(r);
      }
      ready.notify_all();
    }
  };
  const unsigned n_workers = static_cast<unsigned>(std::min<std::uint64_t>(config.workers, std::max<std::uint64_t>(pending, 1)));
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);

  // The log writer: records leave in index order whatever order workers finish in.
  for (std::uint64_t i = 0; i < pending; ++i) {
    LogRecord r;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return slots[i].has_value(); });
      r = std::move(*slots[i]);
      slots[i].reset();
    }
    if (out.is_open()) {
      out << record_to_json(r).dump() << '\n';
      out.flush();
    }
    result.log.records.push_back(std::move(r));
  }
  pool.clear();

  for (const LogRecord& r : result.log.records) result.anomalies += r.anomaly.empty() ? 0 : 1;
  result.stats = compute_stats(result.log);
  return result;
}

// ---- replay ----------------------------------------------------------------

ReplayResult replay(const CampaignLog& log, std::uint64_t index) {
  check_compatible(log.header);
  const CampaignConfig config = config_from_json(log.header.config);
  if (config_hash(config) != log.header.config_hash) throw IncompatibleLog("embedded config does not match its hash");
  const auto target = make_target(config);
  return replay(log, *target, index);
}

ReplayResult replay(const CampaignLog& log, const Target& target, std::uint64_t index) {
  check_compatible(log.header);
  const auto it = std::find_if(log.records.begin(), log.records.end(),
                               [&](const LogRecord& r) { return r.index == index; });
  if (it == log.records.end()) throw ValidationError("log has no record " + std::to_string(index));
  const CampaignConfig config = config_from_json(log.header.config);
  require(target.serves(config), "target was built for a different golden configuration");
  ReplayResult out;
  out.recorded = it->outcome;
  try {
    validate(it->descriptor);
    if (it->descriptor.model != it->model) throw ValidationError("descriptor model differs from the record model");
    out.reproduced = target.evaluate(it->descriptor, it->frame, config).outcome;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.match = out.recorded.has_value() && out.reproduced.has_value() && *out.recorded == *out.reproduced;
  if (!out.recorded && !out.reproduced) out.match = !out.error.empty();  // anomaly reproduced
  return out;
}

}  // namespace warpfault
