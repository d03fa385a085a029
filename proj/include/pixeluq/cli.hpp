#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixeluq/jsonl.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {

enum class InputKind { Text, Jsonl, Image };

// Settings shared by the mc and attention subcommands. Loaded from a JSON
// file; relative paths are resolved against the file's directory. Flags
// override individual fields afterwards.
struct RunConfig {
  std::string tag;
  std::filesystem::path model_config;  // empty: weights file carries the config
  std::filesystem::path weights;
  MaskSpec mask;
  std::vector<double> mask_ratios;  // sweep for dataset runs; empty means {mask.ratio}
  std::size_t n_passes = 100;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  InputKind input_kind = InputKind::Text;
  std::filesystem::path input;
  std::string dataset_kind = "text";  // qa, ner or text, for JSONL inputs
  std::filesystem::path output_dir = "pixeluq-out";

  // Throws ConfigError for invalid values and missing referenced files.
  void validate() const;
  std::vector<double> ratios() const { return mask_ratios.empty() ? std::vector<double>{mask.ratio} : mask_ratios; }
};

// The output directory is left out so that runs differing only in where they
// write share a config hash.
void to_json(nlohmann::json& j, const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);
// Input kind from the file extension: .jsonl, .ppm/.png, anything else is text.
InputKind input_kind_from_path(const std::filesystem::path& path);

struct DatasetExample {
  std::string id;
  std::string text;  // what gets rendered
  std::string dataset;
  std::string language;
  std::string script;
  std::string question;              // qa
  std::vector<std::string> answers;  // qa
  std::vector<std::string> tokens;   // ner
  std::vector<std::string> tags;     // ner
};

struct Dataset {
  std::vector<DatasetExample> examples;
  JsonlStats stats;
};

// kind: qa {id, question, context, answers}, ner {id, tokens, tags},
// text {id, text}; all accept optional dataset, language and script. Lines
// that are not JSON are skipped with a warning unless strict; schema errors
// always raise DataError naming the line.
Dataset ingest_dataset(const std::filesystem::path& path, const std::string& kind, bool strict = false);

// FNV-1a 64-bit of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

// Run manifest: deterministic content plus a separate timestamp field that is
// not part of the hash.
struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs;  // relative to the output directory

  nlohmann::json to_json() const;
  // Writes <dir>/manifest.json with a UTC timestamp.
  std::filesystem::path write(const std::filesystem::path& dir) const;
};

std::string version_string();

// Entry point. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace pixeluq
