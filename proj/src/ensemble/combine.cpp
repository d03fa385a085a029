#include <algorithm>
#include <cctype>
#include <cmath>

#include "pixeluq/ensemble.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {

std::string normalize_answer(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  auto strip = [](unsigned char c) { return std::ispunct(c) || std::isspace(c); };
  std::size_t b = 0, e = out.size();
  while (b < e && strip(out[b])) ++b;
  while (e > b && strip(out[e - 1])) --e;
  return out.substr(b, e - b);
}

QACandidate QACandidate::make(std::string text, std::size_t start, std::size_t end, double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw InputError("candidate confidence " + std::to_string(confidence) + " outside [0, 1]");
  if (start > end) throw InputError("candidate start exceeds end");
  QACandidate c;
  c.normalized_text = normalize_answer(text);
  c.answer_text = std::move(text);
  c.start = start;
  c.end = end;
  c.confidence = confidence;
  return c;
}

void QAModelOutput::canonicalize() {
  std::map<std::string, QACandidate> merged;
  for (auto& c : candidates) {
    if (c.normalized_text.empty()) continue;
    auto [it, inserted] = merged.try_emplace(c.normalized_text, c);
    if (inserted) continue;
    QACandidate& m = it->second;
    if (c.start < m.start) {
      m.start = c.start;
      m.end = c.end;
      m.answer_text = c.answer_text;
    }
    m.confidence = std::max(m.confidence, c.confidence);
  }
  candidates.clear();
  for (auto& [_, c] : merged) candidates.push_back(std::move(c));
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const QACandidate& a, const QACandidate& b) { return a.confidence > b.confidence; });
}

std::string_view to_string(FallbackTier tier) {
  switch (tier) {
    case FallbackTier::AllModels:
      return "all-models";
    case FallbackTier::Majority:
      return "majority";
    case FallbackTier::GlobalMax:
      return "global-max";
  }
  return "unknown";
}

namespace {

struct Pooled {
  std::vector<double> confidences;
  double max_confidence = 0.0;
  std::size_t start = 0, end = 0;
  std::string answer_text;
};

double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

EnsembleAnswer combine_qa(const std::vector<QAModelOutput>& outputs) {
  if (outputs.empty()) throw ConfigError("combine_qa needs at least one model output");
  const std::string& qid = outputs.front().question_id;
  std::map<std::string, Pooled> pool;
  for (const auto& raw : outputs) {
    if (raw.question_id != qid)
      throw InputError("mixed question ids '" + qid + "' and '" + raw.question_id + "'");
    QAModelOutput out = raw;
    out.canonicalize();
    for (const auto& c : out.candidates) {
      auto [it, inserted] = pool.try_emplace(c.normalized_text);
      Pooled& p = it->second;
      if (inserted || c.start < p.start || (c.start == p.start && c.answer_text < p.answer_text)) {
        p.start = c.start;
        p.end = c.end;
        p.answer_text = c.answer_text;
      }
      p.confidences.push_back(c.confidence);
      p.max_confidence = std::max(p.max_confidence, c.confidence);
    }
  }

  EnsembleAnswer best;
  best.question_id = qid;
  best.group = outputs.front().group;
  best.fallback_tier = FallbackTier::GlobalMax;
  if (pool.empty()) return best;

  const std::size_t k = outputs.size();
  const std::size_t majority = (k + 1) / 2;
  const FallbackTier tiers[] = {FallbackTier::AllModels, FallbackTier::Majority, FallbackTier::GlobalMax};
  for (FallbackTier tier : tiers) {
    bool found = false;
    for (const auto& [text, p] : pool) {
      const std::size_t support = p.confidences.size();
      double score;
      if (tier == FallbackTier::AllModels) {
        if (support < k) continue;
        score = sorted_sum(p.confidences) / static_cast<double>(k);
      } else if (tier == FallbackTier::Majority) {
        if (support < majority) continue;
        score = sorted_sum(p.confidences) / static_cast<double>(k);
      } else {
        score = p.max_confidence;
      }
      const bool better = !found || score > best.avg_confidence ||
                          (score == best.avg_confidence &&
                           (p.start < best.start || (p.start == best.start && text < best.normalized_text)));
      if (better) {
        found = true;
        best.normalized_text = text;
        best.answer_text = p.answer_text;
        best.start = p.start;
        best.end = p.end;
        best.avg_confidence = score;
        best.support_count = support;
      }
    }
    if (found) {
      best.fallback_tier = tier;
      return best;
    }
  }
  return best;
}

std::vector<std::size_t> combine_ner(const std::vector<NERLogits>& sets) {
  if (sets.empty()) throw ConfigError("combine_ner needs at least one logit set");
  const auto& ref = sets.front();
  const std::size_t T = ref.tokens(), L = ref.classes.size();
  if (L == 0) throw InputError("empty class list");
  for (const auto& s : sets) {
    if (s.classes != ref.classes) throw InputError("class lists differ between models");
    if (s.tokens() != T) throw InputError("token counts differ between models");
    for (const auto& row : s.logits) {
      if (row.size() != L) throw InputError("logit row length differs from class count");
      for (double v : row)
        if (!std::isfinite(v)) throw InputError("non-finite logit in model " + s.model_id);
    }
  }
  const double k = static_cast<double>(sets.size());
  std::vector<std::size_t> labels(T);
  std::vector<double> column(sets.size());
  for (std::size_t t = 0; t < T; ++t) {
    double best = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < sets.size(); ++i) column[i] = sets[i].logits[t][l];
      const double mean = sorted_sum(column) / k;
      if (l == 0 || mean > best) {
        best = mean;
        labels[t] = l;
      }
    }
  }
  return labels;
}

}  // namespace pixeluq
