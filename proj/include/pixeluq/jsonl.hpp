#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace pixeluq {

struct JsonlStats {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // "<file>:<line>: <reason>"
};

// Calls fn(object, line_number) for each non-blank line. A line that does not
// parse as a JSON object raises DataError naming the line when strict and is
// otherwise skipped with a warning. Errors thrown by fn (schema violations)
// always become DataError naming the line. Throws IoError if the file cannot
// be opened.
JsonlStats read_jsonl(const std::filesystem::path& path,
                      const std::function<void(const nlohmann::json&, std::size_t)>& fn, bool strict = true);

// String ids pass through; integer ids are printed in decimal.
std::string json_id(const nlohmann::json& j, const char* key);

}  // namespace pixeluq
