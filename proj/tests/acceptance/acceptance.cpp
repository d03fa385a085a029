// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// PIXELUQ_ACCEPTANCE_ONLY=3,7 restricts the run to the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pixeluq/attnviz.hpp"
#include "pixeluq/calib.hpp"
#include "pixeluq/cli.hpp"
#include "pixeluq/ensemble.hpp"
#include "pixeluq/mcuq.hpp"
#include "pixeluq/random.hpp"
#include "pixeluq/vitmae.hpp"

using namespace pixeluq;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kBernoulliRelTol = 0.05;
constexpr double kBernoulliMaxSeconds = 60.0;
// Scaled by max(1, |oracle|): clamped GNLL terms reach 1e6, where one double ulp of the mean exceeds 1e-12.
constexpr double kMetricTol = 1e-12;
constexpr double kGnllFloorTol = 1e-9;
constexpr double kGradcheckTol = 1e-3;
constexpr double kGradcheckMaxSeconds = 120.0;
constexpr double kRowSumTol = 1e-5;
constexpr double kSamplerTol = 0.02;
constexpr double kF1Tol = 1e-12;
constexpr int kDirectionalRuns = 20;
constexpr int kDirectionalRequired = 18;
constexpr double kToyTrainMaxSeconds = 300.0;
constexpr double kPearsonTol = 1e-10;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RenderedImage random_image(std::mt19937_64& gen, std::size_t h, std::size_t w, std::size_t c, double lo = 0.0,
                           double hi = 1.0) {
  std::uniform_real_distribution<float> d(static_cast<float>(lo), static_cast<float>(hi));
  RenderedImage img(h, w, c, kDefaultPatchSize);
  for (auto& v : img.pixels) v = d(gen);
  return img;
}

Verdict bernoulli_sd() {
  const auto t0 = std::chrono::steady_clock::now();
  const double p = 0.1;
  const RenderedImage shape(16, 32, 1, 16, 1.0f);
  PassFunction stub = [&](std::uint64_t seed) {
    Rng rng(seed);
    RenderedImage out = shape;
    for (auto& v : out.pixels) v = rng.uniform() < p ? 0.0f : static_cast<float>(1.0 / (1.0 - p));
    return out;
  };
  MCOptions opts;
  opts.n_passes = 10000;
  opts.dropout_rate = p;
  opts.base_seed = 2024;
  const auto r = mc_predict(stub, shape, opts);
  const double analytic = std::sqrt(p / (1.0 - p));
  double worst = 0.0;
  for (float s : r.sd_image.pixels) worst = std::max(worst, std::abs(s - analytic) / analytic);
  const double secs = seconds_since(t0);
  return {worst <= kBernoulliRelTol && secs < kBernoulliMaxSeconds,
          fmt("max relative deviation %.4f from %.4f over %g pixels, %.1f s", worst, analytic,
              double(r.sd_image.pixels.size()), secs)};
}

Verdict metric_oracles() {
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 1 + gen() % 64, w = 1 + gen() % 64, c = trial % 4 == 0 ? 3 : 1;
    const auto pred = random_image(gen, h, w, c), img = random_image(gen, h, w, c);
    auto var = random_image(gen, h, w, c, 0.0, 0.05);
    for (std::size_t i = 0; i < var.pixels.size(); i += 7) var.pixels[i] = 0.0f;

    long double s_sd = 0, s_mse = 0, s_gnll = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k) {
          const long double d = (long double)pred.at(y, x, k) - img.at(y, x, k);
          const long double v = std::max<long double>(var.at(y, x, k), 1e-6L);
          s_sd += var.at(y, x, k);
          s_mse += d * d;
          s_gnll += std::log(v) + d * d / v;
        }
    const long double n = (long double)(h * w * c);
    auto gap = [](long double oracle, double value) {
      return std::abs(double(oracle) - value) / std::max(1.0, std::abs(double(oracle)));
    };
    worst = std::max({worst, gap(s_sd / n, mean_uncertainty(var)), gap(s_mse / n, mse_loss(pred, img)),
                      gap(s_gnll / n, gnll_loss(pred, img, var))});
  }
  const RenderedImage same(16, 16, 1, 16, 0.3f);
  const double floor_gap = std::abs(gnll_loss(same, same, RenderedImage(16, 16, 1)) - std::log(1e-6));
  return {worst <= kMetricTol && floor_gap <= kGnllFloorTol,
          fmt("max scaled deviation %.2e over 100 images, clamp floor gap %.1e", worst, floor_gap)};
}

Verdict per_patch() {
  std::mt19937_64 gen(2);
  std::size_t mismatches = 0, nonconstant = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t P = 16, rows = 1 + gen() % 4, cols = 1 + gen() % 4, c = trial % 3 == 0 ? 3 : 1;
    const auto sd = random_image(gen, rows * P, cols * P, c);
    const auto u = per_patch_uncertainty(sd, P);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < cols; ++q) {
        double s = 0.0;
        for (std::size_t y = r * P; y < (r + 1) * P; ++y)
          for (std::size_t x = q * P; x < (q + 1) * P; ++x)
            for (std::size_t k = 0; k < c; ++k) s += sd.at(y, x, k);
        const auto expect = static_cast<float>(s / double(P * P * c));
        const float first = u.at(r * P, q * P, 0);
        for (std::size_t y = r * P; y < (r + 1) * P; ++y)
          for (std::size_t x = q * P; x < (q + 1) * P; ++x)
            for (std::size_t k = 0; k < c; ++k) {
              mismatches += u.at(y, x, k) != expect;
              nonconstant += u.at(y, x, k) != first;
            }
      }
  }
  return {mismatches == 0 && nonconstant == 0,
          fmt("%g mismatched pixels, %g non-constant pixels over 100 images", double(mismatches), double(nonconstant))};
}

Verdict gradcheck() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    worst = std::max(worst, finite_diff_gradcheck(micro_config(), seed).max_relative_error);
  const double secs = seconds_since(t0);
  return {worst < kGradcheckTol && secs < kGradcheckMaxSeconds,
          fmt("max relative error %.2e over 5 seeds, %.1f s", worst, secs)};
}

double worst_row_error(std::size_t layers, std::size_t heads, std::size_t tokens, const std::vector<float>& w) {
  double worst = 0.0;
  for (std::size_t r = 0; r < layers * heads * tokens; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < tokens; ++j) s += w[r * tokens + j];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

Verdict attention_invariants() {
  std::mt19937_64 gen(3);
  double worst = 0.0;
  std::size_t exact_failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg;
    cfg.num_heads = std::size_t(1) << (gen() % 3);
    cfg.embed_dim = cfg.num_heads * (4 + gen() % 5);
    cfg.num_layers = 1 + gen() % 3;
    cfg.decoder_dim = 16;
    cfg.max_patches = 24;
    const auto w = init_weights(cfg, gen());
    const std::size_t n = 1 + gen() % 20;
    std::string text;
    for (std::size_t i = 0; i < 2 * n; ++i) text += static_cast<char>('a' + gen() % 26);
    const auto img = render_text(text);
    const auto seq = image_to_patches(img);
    MaskSpec spec;
    spec.ratio = double(gen() % 60) / 100.0;
    const auto mask = sample_span_mask(seq.num_patches, spec, gen());

    const auto raw = forward(w, seq, mask, {true, 0.1, gen()}).attention;
    worst = std::max(worst, worst_row_error(raw.layers, raw.heads, raw.tokens, raw.weights));

    MCOptions opts;
    opts.n_passes = 8;
    opts.base_seed = gen();
    const auto avg = mc_attention(w, img, mask, opts);
    worst = std::max(worst, worst_row_error(avg.layers, avg.heads, avg.n_tokens, avg.weights));

    opts.dropout_rate = 0.0;
    const auto p0 = mc_attention(w, img, mask, opts);
    exact_failures += p0.weights != forward(w, seq, mask).attention.weights;
  }
  return {worst <= kRowSumTol && exact_failures == 0,
          fmt("max |row sum - 1| %.2e over 20 configs, %g p=0 grids differ from the deterministic pass", worst,
              double(exact_failures))};
}

Verdict sampler_statistics() {
  MaskSpec spec;
  spec.span_lengths = {1, 2, 3, 4, 5, 6};
  spec.span_weights = {0, 0, 0, 0, 0, 1};
  double worst = 0.0;
  std::size_t bad_spans = 0;
  std::string means;
  for (double r : {0.1, 0.25, 0.5, 0.9}) {
    spec.ratio = r;
    double total = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const auto m = sample_span_mask(100, spec, s);
      total += m.realized_ratio;
      for (const auto& span : m.spans) bad_spans += span.length != 6;
    }
    worst = std::max(worst, std::abs(total / 1000.0 - r));
    means += fmt(" %.4f", total / 1000.0);
  }
  return {worst <= kSamplerTol && bad_spans == 0,
          "mean ratios" + means + fmt(", max deviation %.4f, %g spans not of length 6", worst, double(bad_spans))};
}

Verdict ensemble_oracles() {
  std::mt19937_64 gen(4);
  std::size_t oracle_fail = 0, shift_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + gen() % 5, T = 1 + gen() % 10, L = 2 + gen() % 8;
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < L; ++c) classes.push_back("C" + std::to_string(c));
    std::vector<NERLogits> sets;
    for (std::size_t m = 0; m < k; ++m) {
      NERLogits n{"m" + std::to_string(m), "s", classes, std::vector<std::vector<double>>(T, std::vector<double>(L))};
      // Multiples of 1/8: sums of at most five are exact, so the oracle needs no tolerance.
      for (auto& row : n.logits)
        for (auto& v : row) v = double(int(gen() % 49) - 24) / 8.0;
      sets.push_back(std::move(n));
    }
    std::vector<std::size_t> oracle;
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t best = 0;
      double best_v = -1e300;
      for (std::size_t l = 0; l < L; ++l) {
        double s = 0.0;
        for (const auto& m : sets) s += m.logits[t][l];
        if (s / double(k) > best_v) {
          best_v = s / double(k);
          best = l;
        }
      }
      oracle.push_back(best);
    }
    const auto labels = combine_ner(sets);
    oracle_fail += labels != oracle;
    const std::size_t m = gen() % k, t = gen() % T;
    const double shift = double(int(gen() % 41) - 20) / 4.0;
    for (auto& v : sets[m].logits[t]) v += shift;
    shift_fail += combine_ner(sets) != labels;
  }

  auto out = [](const std::string& id, std::vector<QACandidate> c) {
    QAModelOutput o{id, "q", "", std::move(c)};
    o.canonicalize();
    return o;
  };
  const auto m1 = out("m1", {QACandidate::make("A", 0, 1, 0.9), QACandidate::make("B", 4, 5, 0.5)});
  const auto m2 = out("m2", {QACandidate::make("B", 4, 5, 0.8), QACandidate::make("C", 8, 9, 0.7)});
  const auto ab = combine_qa({m1, m2}), ba = combine_qa({m2, m1});
  const bool hand = ab.normalized_text == "b" && std::abs(ab.avg_confidence - 0.65) <= 1e-12 &&
                    ab.fallback_tier == FallbackTier::AllModels;
  const bool order = ba.normalized_text == ab.normalized_text && ba.avg_confidence == ab.avg_confidence;
  return {oracle_fail == 0 && shift_fail == 0 && hand && order,
          fmt("ner oracle mismatches %g, shift changes %g over 1000 instances; qa answer '", double(oracle_fail),
              double(shift_fail)) +
              ab.answer_text + fmt("' conf %.4f, order invariant %g", ab.avg_confidence, double(order))};
}

Verdict f1_arithmetic() {
  const double f = f1_binary(2, 1, 1);
  const std::vector<std::vector<std::string>> gold{{"B-PER", "I-PER", "O", "B-LOC"}, {"O", "B-ORG", "I-ORG"}};
  const double ner = weighted_f1_ner(gold, gold);
  const double qa = qa_token_f1("the cat", {"cat"});
  return {std::abs(f - 2.0 / 3.0) <= kF1Tol && ner == 1.0 && std::abs(qa - 2.0 / 3.0) <= kF1Tol,
          fmt("f1_binary(2,1,1) %.15f, perfect ner %.1f, token f1 %.15f", f, ner, qa)};
}

struct ToyModel {
  ModelWeights weights;
  std::vector<RenderedImage> held_out;
  double train_seconds = 0.0;
  double final_loss = 0.0;
};

// Trains the toy model once; shared by the two directional criteria.
const ToyModel& toy_model() {
  static const ToyModel model = [] {
    ToyModel m;
    std::ifstream in(fs::path(PIXELUQ_FIXTURE_DIR) / "sentences.txt");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) lines.push_back(line);
    if (lines.size() < 100) throw std::runtime_error("sentences.txt needs 100 lines");

    const ModelConfig cfg = load_model_config(fs::path(PIXELUQ_CONFIG_DIR) / "model_toy.json");
    std::vector<PatchSequence> corpus;
    for (std::size_t i = 0; i < 50; ++i) corpus.push_back(image_to_patches(render_text(lines[i], builtin_atlas(), cfg.max_patches)));
    for (std::size_t i = 50; i < 100; ++i) m.held_out.push_back(render_text(lines[i], builtin_atlas(), cfg.max_patches));

    const auto t0 = std::chrono::steady_clock::now();
    const auto report = train_model(init_weights(cfg, 1), corpus, TrainOptions{});
    m.train_seconds = seconds_since(t0);
    m.weights = report.weights;
    m.final_loss = report.losses.back();
    return m;
  }();
  return model;
}

MaskSpec eval_mask(double ratio, int run) {
  MaskSpec spec;
  spec.ratio = ratio;
  spec.seed = static_cast<std::uint64_t>(run);
  return spec;
}

MCOptions eval_passes(int run, std::size_t k, std::uint64_t salt) {
  MCOptions opts;
  opts.n_passes = 10;
  opts.dropout_rate = 0.1;
  opts.base_seed = mix_seed(mix_seed(salt, static_cast<std::uint64_t>(run)), k);
  return opts;
}

Verdict directional_uncertainty() {
  const auto& toy = toy_model();
  int wins = 0;
  double first_masked = 0, first_visible = 0;
  for (int run = 0; run < kDirectionalRuns; ++run) {
    double um = 0, uv = 0;
    std::size_t nm = 0, nv = 0;
    for (std::size_t k = 0; k < toy.held_out.size(); ++k) {
      const auto& img = toy.held_out[k];
      const auto mask = sample_span_mask(img.num_patches(), eval_mask(0.25, run), k);
      const auto r = mc_predict(toy.weights, img, mask, eval_passes(run, k, 9));
      for (std::size_t p = 0; p < img.num_patches(); ++p) {
        const double u = r.uncertainty_map.at(0, p * img.patch_size);
        (mask.masked(p) ? um : uv) += u;
        ++(mask.masked(p) ? nm : nv);
      }
    }
    um /= double(nm);
    uv /= double(nv);
    if (run == 0) {
      first_masked = um;
      first_visible = uv;
    }
    wins += um > uv;
  }
  return {wins >= kDirectionalRequired && toy.train_seconds <= kToyTrainMaxSeconds,
          fmt("masked U > visible U in %g/%g runs (run 0: %.4f vs %.4f)", wins, kDirectionalRuns, first_masked,
              first_visible) +
              fmt(", training %.1f s, final loss %.4f", toy.train_seconds, toy.final_loss)};
}

Verdict directional_mask_ratio() {
  const auto& toy = toy_model();
  int wins = 0;
  double first_lo = 0, first_hi = 0;
  for (int run = 0; run < kDirectionalRuns; ++run) {
    double lo = 0, hi = 0;
    for (std::size_t k = 0; k < toy.held_out.size(); ++k) {
      const auto& img = toy.held_out[k];
      lo += mc_predict(toy.weights, img, sample_span_mask(img.num_patches(), eval_mask(0.2, run), k),
                       eval_passes(run, k, 2))
                .mse;
      hi += mc_predict(toy.weights, img, sample_span_mask(img.num_patches(), eval_mask(0.8, run), k),
                       eval_passes(run, k, 8))
                .mse;
    }
    lo /= double(toy.held_out.size());
    hi /= double(toy.held_out.size());
    if (run == 0) {
      first_lo = lo;
      first_hi = hi;
    }
    wins += hi > lo;
  }
  return {wins >= kDirectionalRequired,
          fmt("MSE(R=0.8) > MSE(R=0.2) in %g/%g runs (run 0: %.4f vs %.4f)", wins, kDirectionalRuns, first_hi,
              first_lo)};
}

Verdict calibration_analytics() {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.08);
  bool counts_ok = true, conserved = true;
  double r_gap = 0.0;
  bool fraction_ok = true;
  for (int cloud = 0; cloud < 5; ++cloud) {
    std::vector<CalibrationRecord> recs;
    for (int i = 0; i < 500; ++i) {
      CalibrationRecord rec;
      rec.sigma_bar = 0.05 + 0.3 * u(gen);
      rec.rmse = std::max(0.0, 0.9 * rec.sigma_bar + 0.04 + noise(gen));
      recs.push_back(rec);
    }
    const AxisRange xr{0.0, 0.3}, yr{0.0, 0.5};
    const std::size_t grid = 5 + 7 * std::size_t(cloud);
    const auto hb = hexbin_counts(recs, xr, yr, grid);

    std::map<std::pair<long, long>, std::size_t> oracle;
    std::size_t inside = 0;
    const double h = std::sqrt(3.0) / 2.0;
    for (const auto& rec : recs) {
      if (rec.sigma_bar < xr.min || rec.sigma_bar > xr.max || rec.rmse < yr.min || rec.rmse > yr.max) continue;
      ++inside;
      const double uu = (rec.sigma_bar - xr.min) / ((xr.max - xr.min) / double(grid));
      const double vv = (rec.rmse - yr.min) / ((yr.max - yr.min) / double(grid));
      std::pair<long, long> best{0, 0};
      double best_d = 1e300;
      for (long row = long(vv / h) - 3; row <= long(vv / h) + 3; ++row)
        for (long col = long(uu) - 3; col <= long(uu) + 3; ++col) {
          const double dx = uu - (double(col) + (row % 2 != 0 ? 0.5 : 0.0)), dy = vv - double(row) * h;
          if (dx * dx + dy * dy < best_d) {
            best_d = dx * dx + dy * dy;
            best = {row, col};
          }
        }
      ++oracle[best];
    }
    std::size_t total = 0;
    counts_ok = counts_ok && hb.bins.size() == oracle.size();
    for (const auto& b : hb.bins) {
      total += b.count;
      const auto it = oracle.find({b.row, b.col});
      counts_ok = counts_ok && it != oracle.end() && it->second == b.count;
    }
    conserved = conserved && total == inside && total + hb.dropped == recs.size();

    long double mx = 0, my = 0;
    for (const auto& rec : recs) {
      mx += rec.sigma_bar;
      my += rec.rmse;
    }
    mx /= recs.size();
    my /= recs.size();
    long double sxy = 0, sxx = 0, syy = 0;
    for (const auto& rec : recs) {
      sxy += (rec.sigma_bar - mx) * (rec.rmse - my);
      sxx += (rec.sigma_bar - mx) * (rec.sigma_bar - mx);
      syy += (rec.rmse - my) * (rec.rmse - my);
    }
    r_gap = std::max(r_gap, std::abs(double(sxy / std::sqrt(sxx * syy)) - pearson_r(recs)));

    std::size_t above = 0;
    for (const auto& rec : recs) above += rec.rmse > rec.sigma_bar;
    fraction_ok = fraction_ok && underestimation_fraction(recs) == double(above) / double(recs.size());
  }

  std::vector<CalibrationRecord> sym;
  for (int i = 0; i < 250; ++i) {
    const double a = 0.1 + 0.2 * u(gen), b = a + 0.01 + 0.1 * u(gen);
    CalibrationRecord p, q;
    p.sigma_bar = a;
    p.rmse = b;
    q.sigma_bar = b;
    q.rmse = a;
    sym.push_back(p);
    sym.push_back(q);
  }
  const double sym_fraction = underestimation_fraction(sym);
  return {counts_ok && conserved && r_gap <= kPearsonTol && fraction_ok && sym_fraction == 0.5,
          fmt("hexbin oracle match %g, conservation %g, pearson gap %.1e, symmetric fraction %.3f", counts_ok,
              conserved, r_gap, sym_fraction) +
              (fraction_ok ? "" : ", fraction mismatch")};
}

Verdict reproducibility() {
  const fs::path root = fs::temp_directory_path() / "pixeluq_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  ModelConfig cfg;
  cfg.max_patches = 64;
  save_weights(init_weights(cfg, 5), root / "weights.bin");

  std::ostringstream sink;
  auto mc = [&](const std::string& dir) {
    return run({"mc", "--config", (fs::path(PIXELUQ_CONFIG_DIR) / "vu.json").string(), "--weights",
                (root / "weights.bin").string(), "--text", "Reproducible uncertainty maps, please.", "--seed", "11",
                "--passes", "30", "--out", (root / dir).string()},
               sink, sink);
  };
  if (mc("a") != 0 || mc("b") != 0) return {false, "mc exited with an error: " + sink.str()};

  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    ++compared;
    differing += slurp(entry.path()) != slurp(root / "b" / name);
  }
  auto manifest = [&](const char* d) {
    auto j = nlohmann::json::parse(slurp(root / d / "manifest.json"));
    j.erase("timestamp");
    return j;
  };
  const bool manifest_same = manifest("a") == manifest("b");
  const bool has_json = fs::exists(root / "a" / "mc_result.json");
  return {has_json && compared >= 5 && differing == 0 && manifest_same,
          fmt("%g files compared, %g differ, manifests equal without timestamp: %g", double(compared),
              double(differing), manifest_same)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "MC dropout SD on a Bernoulli stub", bernoulli_sd},
      {2, "uncertainty, MSE and GNLL against brute-force sums", metric_oracles},
      {3, "per-patch aggregation", per_patch},
      {4, "finite-difference gradient check", gradcheck},
      {5, "attention row sums and p=0 grid", attention_invariants},
      {6, "span mask sampler statistics", sampler_statistics},
      {7, "ensemble combination oracles", ensemble_oracles},
      {8, "F1 arithmetic", f1_arithmetic},
      {9, "masked patches more uncertain than visible ones", directional_uncertainty},
      {10, "reconstruction error grows with the mask ratio", directional_mask_ratio},
      {11, "calibration analytics", calibration_analytics},
      {12, "byte-identical mc runs", reproducibility},
  };

  std::set<int> only;
  if (const char* env = std::getenv("PIXELUQ_ACCEPTANCE_ONLY")) {
    std::stringstream ss(env);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) only.insert(std::stoi(tok));
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
