#include "pixeluq/cli.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {
namespace {

std::string optional_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::string>();
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

Dataset ingest_dataset(const std::filesystem::path& path, const std::string& kind, bool strict) {
  if (kind != "qa" && kind != "ner" && kind != "text")
    throw ConfigError("dataset kind must be qa, ner or text, got '" + kind + "'");
  Dataset ds;
  ds.stats = read_jsonl(
      path,
      [&](const nlohmann::json& j, std::size_t) {
        DatasetExample ex;
        ex.id = json_id(j, "id");
        ex.dataset = optional_string(j, "dataset");
        ex.language = optional_string(j, "language");
        ex.script = optional_string(j, "script");
        if (kind == "qa") {
          ex.question = j.at("question").get<std::string>();
          ex.text = j.at("context").get<std::string>();
          if (j.contains("answers")) ex.answers = j.at("answers").get<std::vector<std::string>>();
        } else if (kind == "ner") {
          ex.tokens = j.at("tokens").get<std::vector<std::string>>();
          ex.tags = j.at("tags").get<std::vector<std::string>>();
          if (ex.tokens.size() != ex.tags.size())
            throw InputError(std::to_string(ex.tokens.size()) + " tokens but " + std::to_string(ex.tags.size()) +
                             " tags");
          ex.text = join(ex.tokens);
        } else {
          ex.text = j.at("text").get<std::string>();
        }
        if (ex.text.empty()) throw InputError("empty text for example " + ex.id);
        ds.examples.push_back(std::move(ex));
      },
      strict);
  return ds;
}

}  // namespace pixeluq
