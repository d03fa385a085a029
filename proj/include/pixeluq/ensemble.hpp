#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pixeluq/stats.hpp"

namespace pixeluq {

// Lowercase (ASCII), whitespace runs collapsed to one space, leading and
// trailing whitespace/punctuation stripped.
std::string normalize_answer(std::string_view text);

struct QACandidate {
  std::string answer_text;
  std::string normalized_text;
  std::size_t start = 0;
  std::size_t end = 0;
  double confidence = 0.0;

  // Fills normalized_text; throws InputError for confidence outside [0, 1] or start > end.
  static QACandidate make(std::string text, std::size_t start, std::size_t end, double confidence);
};

struct QAModelOutput {
  std::string model_id;
  std::string question_id;
  std::string group;  // optional grouping label such as a language code
  std::vector<QACandidate> candidates;

  // Merges duplicate normalized texts (max confidence, earliest start) and
  // sorts by descending confidence.
  void canonicalize();
};

enum class FallbackTier { AllModels, Majority, GlobalMax };
std::string_view to_string(FallbackTier tier);

struct EnsembleAnswer {
  std::string question_id;
  std::string group;
  std::string normalized_text;  // empty when no model produced a candidate
  std::string answer_text;
  std::size_t start = 0;
  std::size_t end = 0;
  double avg_confidence = 0.0;
  std::size_t support_count = 0;
  FallbackTier fallback_tier = FallbackTier::AllModels;
};

// Candidates found in all k models are scored by mean confidence. If none,
// candidates found in at least ceil(k/2) models are scored by the sum of their
// confidences over k (missing models count 0). If still none, the single
// highest confidence wins. Ties: earliest start offset, then normalized text.
// Throws ConfigError for k = 0 and InputError for mixed question ids.
EnsembleAnswer combine_qa(const std::vector<QAModelOutput>& outputs);

struct NERLogits {
  std::string model_id;
  std::string sentence_id;
  std::vector<std::string> classes;
  std::vector<std::vector<double>> logits;  // [token][class]

  std::size_t tokens() const { return logits.size(); }
};

// Per token, argmax over classes of the mean logit across models; ties go to
// the lowest class index. The per-class sum is taken over sorted values, so
// model order never matters. Throws ConfigError for k = 0, InputError on
// shape or class-list mismatch.
std::vector<std::size_t> combine_ner(const std::vector<NERLogits>& logit_sets);

// 2tp / (2tp + fp + fn); 0 when the denominator is 0.
double f1_binary(double tp, double fp, double fn);

struct Entity {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string type;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

// BIO decoding. An I- tag that does not continue an open entity of the same
// type starts a new one. Throws InputError for tags other than O, B-X, I-X.
std::vector<Entity> decode_bio(const std::vector<std::string>& tags, std::size_t sentence = 0);

// Entity-level F1 per type, averaged with gold-support weights. Types with no
// gold entities get weight 0. An empty class_set means every type seen in
// gold or predictions. Returns 0 if there are no gold entities.
double weighted_f1_ner(const std::vector<std::vector<std::string>>& pred_labels,
                       const std::vector<std::vector<std::string>>& gold_labels,
                       const std::vector<std::string>& class_set = {});

// Best token-overlap F1 over the gold answers (multiset of whitespace tokens
// after normalize_answer).
double qa_token_f1(std::string_view pred_text, const std::vector<std::string>& gold_texts);

std::map<std::string, DistributionSummary> confidence_distribution(
    const std::vector<EnsembleAnswer>& answers,
    const std::function<std::string(const EnsembleAnswer&)>& group_key);

// JSONL readers. Malformed lines raise DataError naming the file and line.
std::vector<QAModelOutput> read_qa_outputs(const std::filesystem::path& path);
std::vector<NERLogits> read_ner_logits(const std::filesystem::path& path);
std::map<std::string, std::vector<std::string>> read_qa_gold(const std::filesystem::path& path);
std::map<std::string, std::vector<std::string>> read_ner_gold(const std::filesystem::path& path);

}  // namespace pixeluq
