#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pixeluq/cli.hpp"
#include "pixeluq/errors.hpp"
#include "test_support.hpp"

using namespace pixeluq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

void check_manifest(const fs::path& dir) {
  const auto m = nlohmann::json::parse(testing::slurp(dir / "manifest.json"));
  CHECK(m.contains("config_hash"));
  CHECK(m.contains("timestamp"));
  CHECK(m.at("version") == version_string());
  REQUIRE(m.at("outputs").is_array());
  CHECK_FALSE(m.at("outputs").empty());
  for (const auto& f : m.at("outputs")) CHECK_MESSAGE(fs::exists(dir / f.get<std::string>()), f);
}

fs::path tiny_weights(const fs::path& dir) {
  ModelConfig cfg;
  cfg.max_patches = 32;
  const auto path = dir / "w.bin";
  save_weights(init_weights(cfg, 1), path);
  return path;
}

}  // namespace

TEST_CASE("dataset ingestion") {
  const auto qa = ingest_dataset(testing::fixture("qa_dataset.jsonl"), "qa");
  CHECK(qa.examples.size() == 3);
  CHECK(qa.examples[2].answers.size() == 2);
  CHECK(qa.examples[0].text == "The river runs past the old mill.");
  CHECK(qa.examples[0].language == "eng");

  const auto lenient = ingest_dataset(testing::fixture("text_dataset_malformed.jsonl"), "text");
  CHECK(lenient.examples.size() == 2);
  CHECK(lenient.stats.warnings.size() == 1);
  CHECK(lenient.stats.skipped == 1);
  CHECK_THROWS_AS(ingest_dataset(testing::fixture("text_dataset_malformed.jsonl"), "text", true), DataError);

  try {
    ingest_dataset(testing::fixture("ner_dataset_mismatch.jsonl"), "ner");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  const auto ner = ingest_dataset(testing::fixture("ner_dataset.jsonl"), "ner");
  CHECK(ner.examples.size() == 2);
  CHECK(ner.examples[1].text == "Kano Pillars won");
  CHECK_THROWS_AS(ingest_dataset(testing::fixture("qa_dataset.jsonl"), "speech"), ConfigError);
}

TEST_CASE("run config") {
  const auto cfg = load_run_config(fs::path(PIXELUQ_CONFIG_DIR) / "vu.json");
  CHECK(cfg.mask.ratio == 0.25);
  CHECK(cfg.mask.span_weights == std::vector<double>{0.2, 0.4, 0.6, 0.8, 0.9, 1.0});
  CHECK(cfg.n_passes == 100);
  CHECK(cfg.dropout == 0.1);

  const auto mcu = load_run_config(fs::path(PIXELUQ_CONFIG_DIR) / "mcu.json");
  CHECK(mcu.mask.span_weights == std::vector<double>{0, 0, 0, 0, 0, 1});
  CHECK(mcu.ratios().size() > 1);

  const auto dir = testing::scratch_dir("cli_config");
  std::ofstream(dir / "bad.json") << R"({"n_passes": 10, "colour": "red"})";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "ratio.json") << R"({"mask": {"ratio": 2.0}})";
  CHECK_THROWS_AS(load_run_config(dir / "ratio.json"), ConfigError);

  auto a = cfg;
  auto b = cfg;
  b.output_dir = "elsewhere";
  CHECK(config_hash(nlohmann::json(a)) == config_hash(nlohmann::json(b)));
  b.seed = 99;
  CHECK(config_hash(nlohmann::json(a)) != config_hash(nlohmann::json(b)));
  CHECK(config_hash(nlohmann::json(a)).size() == 16);

  CHECK(input_kind_from_path("x.jsonl") == InputKind::Jsonl);
  CHECK(input_kind_from_path("x.png") == InputKind::Image);
  CHECK(input_kind_from_path("x.txt") == InputKind::Text);
}

TEST_CASE("manifest hash ignores the timestamp") {
  Manifest m;
  m.command = "unit";
  m.config = {{"a", 1}};
  const auto j1 = m.to_json();
  const auto dir = testing::scratch_dir("cli_manifest");
  m.write(dir);
  const auto j2 = nlohmann::json::parse(testing::slurp(dir / "manifest.json"));
  CHECK(j1.at("config_hash") == j2.at("config_hash"));
  CHECK(j2.contains("timestamp"));
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"render", "--no-such-flag"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"--version"}).out.find(version_string()) != std::string::npos);

  const auto dir = testing::scratch_dir("cli_codes");
  std::ofstream(dir / "empty.txt").close();
  CHECK(cli({"render", "--text-file", (dir / "empty.txt").string(), "--out", (dir / "r").string()}).code == 2);
  CHECK(cli({"mc", "--weights", (dir / "missing.bin").string(), "--text", "x", "--out", dir.string()}).code != 0);
  CHECK(cli({"mc", "--input", testing::fixture("ner_dataset_mismatch.jsonl").string(), "--dataset-kind", "ner",
             "--weights", tiny_weights(dir).string(), "--passes", "2", "--out", (dir / "m").string()})
            .code == 2);
  CHECK(cli({"mc", "--text", "abc", "--weights", tiny_weights(dir).string(), "--passes", "1", "--out",
             (dir / "m1").string()})
            .code == 1);
  CHECK(cli({"gradcheck", "--seeds", "1", "--tolerance", "1e-30", "--out", (dir / "g").string()}).code == 3);
}

TEST_CASE("render writes a strip and a manifest") {
  const auto dir = testing::scratch_dir("cli_render");
  std::ofstream(dir / "a.txt") << "Hello pixels";
  const auto r = cli({"render", "--text-file", (dir / "a.txt").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("patches: 6") != std::string::npos);
  check_manifest(dir / "out");
}

TEST_CASE("mc, attention and reconstruct pipelines") {
  const auto dir = testing::scratch_dir("cli_mc");
  const auto w = tiny_weights(dir).string();

  const auto mc = cli({"mc", "--config", (fs::path(PIXELUQ_CONFIG_DIR) / "vu.json").string(), "--weights", w, "--text",
                       "pipeline check", "--passes", "4", "--seed", "3", "--out", (dir / "mc").string()});
  REQUIRE_MESSAGE(mc.code == 0, mc.err);
  check_manifest(dir / "mc");
  const auto j = nlohmann::json::parse(testing::slurp(dir / "mc" / "mc_result.json"));
  CHECK(j.at("n_passes") == 4);

  const auto ds = cli({"mc", "--weights", w, "--input", testing::fixture("text_dataset.jsonl").string(), "--passes",
                       "3", "--out", (dir / "ds").string()});
  REQUIRE_MESSAGE(ds.code == 0, ds.err);
  check_manifest(dir / "ds");
  const auto cal = cli({"calibrate", "--records", (dir / "ds" / "records.csv").string(), "--group-by", "dataset",
                        "--out", (dir / "cal").string()});
  REQUIRE_MESSAGE(cal.code == 0, cal.err);
  check_manifest(dir / "cal");

  const auto at = cli({"attention", "--weights", w, "--text", "attend", "--passes", "2", "--cells", "--out",
                       (dir / "att").string()});
  REQUIRE_MESSAGE(at.code == 0, at.err);
  check_manifest(dir / "att");

  const auto rc = cli({"reconstruct", "--weights", w, "--text", "rebuild me", "--out", (dir / "rc").string()});
  REQUIRE_MESSAGE(rc.code == 0, rc.err);
  check_manifest(dir / "rc");
}

TEST_CASE("ensemble commands on fixtures") {
  const auto dir = testing::scratch_dir("cli_ensemble");
  const auto ner = cli({"ensemble-ner", "--models", testing::fixture("ner_model1.jsonl").string(),
                        testing::fixture("ner_model2.jsonl").string(), "--gold",
                        testing::fixture("ner_gold.jsonl").string(), "--out", (dir / "ner").string()});
  REQUIRE_MESSAGE(ner.code == 0, ner.err);
  CHECK(ner.out.find("weighted F1: 1") != std::string::npos);
  check_manifest(dir / "ner");

  const auto qa = cli({"ensemble-qa", "--models", testing::fixture("qa_model1.jsonl").string(),
                       testing::fixture("qa_model2.jsonl").string(), "--gold", testing::fixture("qa_gold.jsonl").string(),
                       "--out", (dir / "qa").string()});
  REQUIRE_MESSAGE(qa.code == 0, qa.err);
  check_manifest(dir / "qa");
  std::istringstream lines(testing::slurp(dir / "qa" / "combined.jsonl"));
  std::string first;
  std::getline(lines, first);
  const auto q1 = nlohmann::json::parse(first);
  CHECK(q1.at("normalized") == "b");
  CHECK(q1.at("confidence").get<double>() == doctest::Approx(0.65));
}

TEST_CASE("train writes weights and losses") {
  const auto dir = testing::scratch_dir("cli_train");
  const auto r = cli({"train", "--corpus", testing::fixture("sentences.txt").string(), "--steps", "3", "--batch-size",
                      "2", "--model-config", (fs::path(PIXELUQ_CONFIG_DIR) / "model_toy.json").string(), "--out",
                      (dir / "t").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  check_manifest(dir / "t");
  CHECK_NOTHROW(load_weights(dir / "t" / "weights.bin"));
}
