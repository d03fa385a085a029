#include "pixeluq/jsonl.hpp"

#include <fstream>

#include "pixeluq/errors.hpp"

namespace pixeluq {

JsonlStats read_jsonl(const std::filesystem::path& path,
                      const std::function<void(const nlohmann::json&, std::size_t)>& fn, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  JsonlStats stats;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (!j.is_object()) throw InputError("expected a JSON object");
    } catch (const std::exception& e) {
      if (strict) throw DataError(where + e.what());
      ++stats.skipped;
      stats.warnings.push_back(where + e.what());
      continue;
    }
    try {
      fn(j, n);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError&) {
      throw;
    } catch (const Error& e) {
      throw DataError(where + e.what());
    }
    ++stats.records;
  }
  return stats;
}

std::string json_id(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  throw InputError(std::string("field '") + key + "' must be a string or integer");
}

}  // namespace pixeluq
