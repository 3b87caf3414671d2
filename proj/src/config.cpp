#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "warpfault/campaign.hpp"
#include "warpfault/errors.hpp"
#include "warpfault/rng.hpp"

namespace warpfault {

namespace pt = boost::property_tree;

std::uint64_t CampaignConfig::total_injections() const {
  std::uint64_t total = 0;
  for (const auto& [model, count] : mix) total += count;
  return total;
}

StorageClass CampaignConfig::storage_for(FaultModel m) const {
  const auto it = storage.find(m);
  return it == storage.end() ? default_storage(m) : it->second;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const auto x = std::stoull(v, &used, 0);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument("bad number");
    return x;
  } catch (const std::exception&) {
    throw ValidationError(key + ": expected a number, got '" + v + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  if (v.empty()) return {};
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

void apply_target(CampaignConfig& c, const pt::ptree& section, const std::filesystem::path& base) {
  for (const auto& [key, node] : section) {
    const std::string v = trim(node.data());
    const std::string k = "target." + key;
    if (key == "kind") {
      if (v == "gemm") c.kind = TargetKind::Gemm;
      else if (v == "network") c.kind = TargetKind::Network;
      else throw ValidationError(k + ": expected gemm or network, got '" + v + "'");
    } else if (key == "algorithm") {
      c.gemm.algorithm = c.network.algorithm = parse_algorithm(v);
    } else if (key == "precision") {
      c.gemm.precision = c.network.precision = parse_precision(v);
    } else if (key == "m") {
      c.gemm.m = parse_u64(k, v);
    } else if (key == "n") {
      c.gemm.n = parse_u64(k, v);
    } else if (key == "k") {
      c.gemm.k = parse_u64(k, v);
    } else if (key == "input_seed") {
      c.gemm.input_seed = parse_u64(k, v);
    } else if (key == "network") {
      c.network.network = resolve(base, v);
    } else if (key == "frames") {
      c.network.frames = resolve(base, v);
    } else if (key == "frame_count") {
      c.network.frame_count = parse_u64(k, v);
    } else {
      throw ValidationError("unknown key " + k);
    }
  }
}

void apply_faults(CampaignConfig& c, const pt::ptree& section) {
  for (const auto& [key, node] : section) {
    const std::string v = trim(node.data());
    const std::string k = "faults." + key;
    if (key == "classes") {
      c.filter.classes.clear();
      for (const auto& item : split_list(v)) c.filter.classes.insert(parse_register_class(item));
    } else if (key == "opcodes") {
      c.filter.opcodes.clear();
      for (const auto& item : split_list(v)) c.filter.opcodes.insert(parse_opcode(item));
    } else {
      c.mix[parse_fault_model(key)] = parse_u64(k, v);
    }
  }
}

}  // namespace

CampaignConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  CampaignConfig c;
  for (const auto& [name, section] : tree) {
    if (!section.data().empty()) throw ValidationError("config: key '" + name + "' outside a section");
    if (name == "target") {
      apply_target(c, section, base_dir);
    } else if (name == "faults") {
      apply_faults(c, section);
    } else if (name == "storage") {
      for (const auto& [key, node] : section) c.storage[parse_fault_model(key)] = parse_storage_class(trim(node.data()));
    } else if (name == "ecc") {
      for (const auto& [key, node] : section) {
        if (key != "mode") throw ValidationError("unknown key ecc." + key);
        c.ecc = parse_ecc_mode(trim(node.data()));
      }
    } else if (name == "campaign") {
      for (const auto& [key, node] : section) {
        const std::string v = trim(node.data());
        if (key == "seed") c.seed = parse_u64("campaign.seed", v);
        else if (key == "workers") c.workers = static_cast<unsigned>(parse_u64("campaign.workers", v));
        else throw ValidationError("unknown key campaign." + key);
      }
    } else if (name == "thresholds") {
      for (const auto& [key, node] : section) {
        const double v = parse_double("thresholds." + key, trim(node.data()));
        if (key == "square_density") c.square_density = v;
        else if (key == "confidence") c.thresholds.confidence = v;
        else if (key == "nms_iou") c.thresholds.nms_iou = v;
        else if (key == "match_iou") c.thresholds.match_iou = v;
        else if (key == "tolerable_iou") c.thresholds.tolerable_iou = v;
        else throw ValidationError("unknown key thresholds." + key);
      }
    } else if (name == "fit") {
      FitParams f;
      for (const auto& [key, node] : section) {
        const double v = parse_double("fit." + key, trim(node.data()));
        if (key == "fluence") f.fluence = v;
        else if (key == "flux") f.reference_flux = v;
        else throw ValidationError("unknown key fit." + key);
      }
      c.fit = f;
    } else {
      throw ValidationError("unknown config section [" + name + "]");
    }
  }
  validate(c);
  return c;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  return parse_config(in, std::filesystem::absolute(path).parent_path());
}

void validate(const CampaignConfig& c) {
  if (c.mix.empty() || c.total_injections() == 0) throw ValidationError("fault mix has no injections");
  if (c.filter.classes.empty()) throw ValidationError("faults.classes is empty");
  if (c.workers == 0) throw ValidationError("campaign.workers must be at least 1");
  if (!(c.square_density > 0.0 && c.square_density <= 1.0)) throw ValidationError("square_density must be in (0, 1]");
  for (double v : {c.thresholds.confidence, c.thresholds.nms_iou, c.thresholds.match_iou, c.thresholds.tolerable_iou}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("thresholds must lie in [0, 1]");
  }
  if (c.fit && !(c.fit->fluence > 0.0 && c.fit->reference_flux > 0.0)) {
    throw ValidationError("fit.fluence and fit.flux must be positive");
  }
  if (c.kind == TargetKind::Gemm) {
    if (c.gemm.m == 0 || c.gemm.n == 0 || c.gemm.k == 0) throw ValidationError("GEMM dimensions must be positive");
    if (c.gemm.m * c.gemm.n > (std::size_t{1} << 26)) throw ValidationError("GEMM output too large");
  } else {
    if (c.network.frame_count == 0) throw ValidationError("target.frame_count must be positive");
    if (!c.network.network.empty() && !std::filesystem::is_regular_file(c.network.network)) {
      throw ValidationError("network file not found: " + c.network.network.string());
    }
    if (!c.network.frames.empty() && !std::filesystem::is_directory(c.network.frames)) {
      throw ValidationError("frames directory not found: " + c.network.frames.string());
    }
  }
}

nlohmann::json config_to_json(const CampaignConfig& c) {
  nlohmann::json j;
  if (c.kind == TargetKind::Gemm) {
    j["target"] = {{"kind", "gemm"},
                   {"algorithm", to_string(c.gemm.algorithm)},
                   {"precision", to_string(c.gemm.precision)},
                   {"m", c.gemm.m},
                   {"n", c.gemm.n},
                   {"k", c.gemm.k},
                   {"input_seed", c.gemm.input_seed}};
  } else {
    j["target"] = {{"kind", "network"},
                   {"algorithm", to_string(c.network.algorithm)},
                   {"precision", to_string(c.network.precision)},
                   {"network", c.network.network.generic_string()},
                   {"frames", c.network.frames.generic_string()},
                   {"frame_count", c.network.frame_count}};
  }
  nlohmann::json mix = nlohmann::json::object();
  for (FaultModel m : kAllFaultModels) {
    if (const auto it = c.mix.find(m); it != c.mix.end()) mix[std::string(to_string(m))] = it->second;
  }
  j["mix"] = mix;
  nlohmann::json classes = nlohmann::json::array(), opcodes = nlohmann::json::array();
  for (RegisterClass rc : c.filter.classes) classes.push_back(std::string(to_string(rc)));
  for (Opcode op : c.filter.opcodes) opcodes.push_back(std::string(to_string(op)));
  j["classes"] = classes;
  j["opcodes"] = opcodes;
  nlohmann::json storage = nlohmann::json::object();
  for (const auto& [m, s] : c.storage) storage[std::string(to_string(m))] = std::string(to_string(s));
  j["storage"] = storage;
  j["ecc"] = std::string(to_string(c.ecc));
  j["seed"] = c.seed;
  j["square_density"] = c.square_density;
  j["thresholds"] = {{"confidence", c.thresholds.confidence},
                     {"nms_iou", c.thresholds.nms_iou},
                     {"match_iou", c.thresholds.match_iou},
                     {"tolerable_iou", c.thresholds.tolerable_iou}};
  if (c.fit) j["fit"] = {{"fluence", c.fit->fluence}, {"flux", c.fit->reference_flux}};
  return j;
}

CampaignConfig config_from_json(const nlohmann::json& j) {
  try {
    CampaignConfig c;
    const auto& t = j.at("target");
    const std::string kind = t.at("kind").get<std::string>();
    if (kind == "gemm") {
      c.kind = TargetKind::Gemm;
      c.gemm.algorithm = parse_algorithm(t.at("algorithm").get<std::string>());
      c.gemm.precision = parse_precision(t.at("precision").get<std::string>());
      c.gemm.m = t.at("m").get<std::size_t>();
      c.gemm.n = t.at("n").get<std::size_t>();
      c.gemm.k = t.at("k").get<std::size_t>();
      c.gemm.input_seed = t.at("input_seed").get<std::uint64_t>();
    } else if (kind == "network") {
      c.kind = TargetKind::Network;
      c.network.algorithm = parse_algorithm(t.at("algorithm").get<std::string>());
      c.network.precision = parse_precision(t.at("precision").get<std::string>());
      c.network.network = t.at("network").get<std::string>();
      c.network.frames = t.at("frames").get<std::string>();
      c.network.frame_count = t.at("frame_count").get<std::size_t>();
    } else {
      throw ValidationError("unknown target kind '" + kind + "'");
    }
    for (const auto& [name, count] : j.at("mix").items()) c.mix[parse_fault_model(name)] = count.get<std::uint64_t>();
    c.filter.classes.clear();
    for (const auto& rc : j.at("classes")) c.filter.classes.insert(parse_register_class(rc.get<std::string>()));
    for (const auto& op : j.at("opcodes")) c.filter.opcodes.insert(parse_opcode(op.get<std::string>()));
    for (const auto& [name, s] : j.at("storage").items()) {
      c.storage[parse_fault_model(name)] = parse_storage_class(s.get<std::string>());
    }
    c.ecc = parse_ecc_mode(j.at("ecc").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.square_density = j.at("square_density").get<double>();
    const auto& th = j.at("thresholds");
    c.thresholds.confidence = th.at("confidence").get<double>();
    c.thresholds.nms_iou = th.at("nms_iou").get<double>();
    c.thresholds.match_iou = th.at("match_iou").get<double>();
    c.thresholds.tolerable_iou = th.at("tolerable_iou").get<double>();
    if (j.contains("fit")) c.fit = FitParams{j["fit"].at("fluence").get<double>(), j["fit"].at("flux").get<double>()};
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embedded config: ") + e.what());
  }
}

std::uint64_t config_hash(const CampaignConfig& config) { return fnv1a64(config_to_json(config).dump()); }

}  // namespace warpfault
