#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>

#include "pixeluq/cli.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {

std::string version_string() { return "0.1.0"; }

InputKind input_kind_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jsonl") return InputKind::Jsonl;
  if (ext == ".ppm" || ext == ".png") return InputKind::Image;
  return InputKind::Text;
}

void RunConfig::validate() const {
  mask.validate();
  for (double r : mask_ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mask ratios must lie in [0, 1]");
  if (n_passes < 2) throw ConfigError("n_passes must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (dataset_kind != "qa" && dataset_kind != "ner" && dataset_kind != "text")
    throw ConfigError("dataset_kind must be qa, ner or text");
  auto exists = [](const std::filesystem::path& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  exists(model_config, "model config");
  exists(weights, "weights file");
  exists(input, "input");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"tag", c.tag},
                     {"model_config", c.model_config.generic_string()},
                     {"weights", c.weights.generic_string()},
                     {"mask", c.mask},
                     {"mask_ratios", c.mask_ratios},
                     {"n_passes", c.n_passes},
                     {"dropout", c.dropout},
                     {"seed", c.seed},
                     {"input", c.input.generic_string()},
                     {"dataset_kind", c.dataset_kind}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read run config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  static const std::set<std::string> known{"tag",  "model_config", "weights", "mask",  "mask_ratios", "n_passes",
                                           "dropout", "seed", "input", "dataset_kind", "output_dir", "description"};
  for (const auto& [k, _] : j.items())
    if (!known.contains(k)) throw ConfigError(path.string() + ": unknown field '" + k + "'");

  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  RunConfig c;
  try {
    c.tag = j.value("tag", c.tag);
    c.model_config = resolve(j.value("model_config", std::string()));
    c.weights = resolve(j.value("weights", std::string()));
    if (j.contains("mask")) c.mask = j.at("mask").get<MaskSpec>();
    c.mask_ratios = j.value("mask_ratios", c.mask_ratios);
    c.n_passes = j.value("n_passes", c.n_passes);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    c.input = resolve(j.value("input", std::string()));
    if (!c.input.empty()) c.input_kind = input_kind_from_path(c.input);
    c.dataset_kind = j.value("dataset_kind", c.dataset_kind);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return c;
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : outputs) files.push_back(p.generic_string());
  return {{"tool", "pixeluq"},   {"version", version_string()}, {"command", command},
          {"config", config},    {"config_hash", config_hash(config)},
          {"seeds", seeds},      {"outputs", files}};
}

std::filesystem::path Manifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j = to_json();
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["timestamp"] = stamp;
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  return path;
}

}  // namespace pixeluq
