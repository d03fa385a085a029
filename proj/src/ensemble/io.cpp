#include "pixeluq/ensemble.hpp"
#include "pixeluq/errors.hpp"
#include "pixeluq/jsonl.hpp"

namespace pixeluq {

std::vector<QAModelOutput> read_qa_outputs(const std::filesystem::path& path) {
  std::vector<QAModelOutput> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    QAModelOutput m;
    m.model_id = json_id(j, "model_id");
    m.question_id = json_id(j, "question_id");
    if (j.contains("group")) m.group = j.at("group").get<std::string>();
    for (const auto& c : j.at("candidates"))
      m.candidates.push_back(QACandidate::make(c.at("text").get<std::string>(), c.at("start").get<std::size_t>(),
                                               c.at("end").get<std::size_t>(), c.at("confidence").get<double>()));
    m.canonicalize();
    out.push_back(std::move(m));
  });
  return out;
}

std::vector<NERLogits> read_ner_logits(const std::filesystem::path& path) {
  std::vector<NERLogits> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    NERLogits n;
    n.model_id = json_id(j, "model_id");
    n.sentence_id = json_id(j, "sentence_id");
    n.classes = j.at("classes").get<std::vector<std::string>>();
    n.logits = j.at("logits").get<std::vector<std::vector<double>>>();
    for (const auto& row : n.logits)
      if (row.size() != n.classes.size()) throw InputError("logit row length differs from class count");
    out.push_back(std::move(n));
  });
  return out;
}

std::map<std::string, std::vector<std::string>> read_qa_gold(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    auto answers = j.at("answers").get<std::vector<std::string>>();
    if (answers.empty()) throw InputError("empty answer list");
    out[json_id(j, "question_id")] = std::move(answers);
  });
  return out;
}

std::map<std::string, std::vector<std::string>> read_ner_gold(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    auto labels = j.at("labels").get<std::vector<std::string>>();
    decode_bio(labels);
    out[json_id(j, "sentence_id")] = std::move(labels);
  });
  return out;
}

}  // namespace pixeluq
