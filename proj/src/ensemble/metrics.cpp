#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "pixeluq/ensemble.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {

double f1_binary(double tp, double fp, double fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw DomainError("F1 counts must be non-negative");
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

std::vector<Entity> decode_bio(const std::vector<std::string>& tags, std::size_t sentence) {
  std::vector<Entity> out;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      open = false;
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I'))
      throw InputError("invalid BIO tag '" + tag + "' at position " + std::to_string(i));
    const std::string type = tag.substr(2);
    if (tag[0] == 'I' && open && out.back().type == type) {
      out.back().end = i + 1;
      continue;
    }
    out.push_back({sentence, i, i + 1, type});
    open = true;
  }
  return out;
}

double weighted_f1_ner(const std::vector<std::vector<std::string>>& pred_labels,
                       const std::vector<std::vector<std::string>>& gold_labels,
                       const std::vector<std::string>& class_set) {
  if (pred_labels.size() != gold_labels.size()) throw InputError("prediction and gold sentence counts differ");
  std::set<Entity> pred, gold;
  for (std::size_t s = 0; s < gold_labels.size(); ++s) {
    if (pred_labels[s].size() != gold_labels[s].size())
      throw InputError("sentence " + std::to_string(s) + ": prediction and gold lengths differ");
    for (auto& e : decode_bio(pred_labels[s], s)) pred.insert(std::move(e));
    for (auto& e : decode_bio(gold_labels[s], s)) gold.insert(std::move(e));
  }
  std::set<std::string> types(class_set.begin(), class_set.end());
  if (types.empty()) {
    for (const auto& e : pred) types.insert(e.type);
    for (const auto& e : gold) types.insert(e.type);
  }
  struct Counts {
    double tp = 0, fp = 0, fn = 0, support = 0;
  };
  std::map<std::string, Counts> per;
  for (const auto& t : types) per[t];
  for (const auto& e : pred) {
    auto it = per.find(e.type);
    if (it == per.end()) continue;
    (gold.contains(e) ? it->second.tp : it->second.fp) += 1;
  }
  for (const auto& e : gold) {
    auto it = per.find(e.type);
    if (it == per.end()) continue;
    it->second.support += 1;
    if (!pred.contains(e)) it->second.fn += 1;
  }
  double weighted = 0.0, total = 0.0;
  for (const auto& [_, c] : per) {
    if (c.support == 0) continue;
    weighted += c.support * f1_binary(c.tp, c.fp, c.fn);
    total += c.support;
  }
  return total == 0.0 ? 0.0 : weighted / total;
}

namespace {

std::vector<std::string> tokens_of(std::string_view text) {
  std::istringstream in(normalize_answer(text));
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double qa_token_f1(std::string_view pred_text, const std::vector<std::string>& gold_texts) {
  if (gold_texts.empty()) throw InputError("qa_token_f1 needs at least one gold answer");
  const auto pred = tokens_of(pred_text);
  double best = 0.0;
  for (const auto& g : gold_texts) {
    const auto gold = tokens_of(g);
    std::vector<std::string> common;
    std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(), std::back_inserter(common));
    const double tp = static_cast<double>(common.size());
    best = std::max(best, f1_binary(tp, static_cast<double>(pred.size()) - tp, static_cast<double>(gold.size()) - tp));
  }
  return best;
}

std::map<std::string, DistributionSummary> confidence_distribution(
    const std::vector<EnsembleAnswer>& answers, const std::function<std::string(const EnsembleAnswer&)>& group_key) {
  if (answers.empty()) throw EmptyInputError("no answers to summarize");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& a : answers) groups[group_key ? group_key(a) : std::string("all")].push_back(a.avg_confidence);
  std::map<std::string, DistributionSummary> out;
  for (auto& [k, v] : groups) out[k] = summarize(std::move(v));
  return out;
}

}  // namespace pixeluq
