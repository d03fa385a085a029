#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "pixeluq/attnviz.hpp"
#include "pixeluq/calib.hpp"
#include "pixeluq/cli.hpp"
#include "pixeluq/ensemble.hpp"
#include "pixeluq/errors.hpp"
#include "pixeluq/mcuq.hpp"
#include "pixeluq/random.hpp"

namespace pixeluq {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Line breaks become spaces; surrounding whitespace is dropped.
std::string flatten_text(std::string text) {
  for (auto& c : text)
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  const auto b = text.find_first_not_of(' ');
  if (b == std::string::npos) return {};
  return text.substr(b, text.find_last_not_of(' ') - b + 1);
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
}

ImageFormat parse_format(const std::string& f) {
  if (f == "ppm") return ImageFormat::Ppm;
  if (f == "png") return ImageFormat::Png;
  throw ConfigError("--format must be ppm or png");
}

std::string ext_of(ImageFormat f) { return f == ImageFormat::Png ? ".png" : ".ppm"; }

RenderedImage render_for_model(const std::string& text, const ModelConfig& cfg, const std::string& atlas_source) {
  const GlyphAtlas atlas = load_atlas(atlas_source, cfg.patch_size);
  RenderedImage img = render_text(text, atlas, cfg.max_patches);
  return cfg.channels == 3 ? to_rgb(img) : img;
}

RenderedImage load_image_for_model(const fs::path& path, const ModelConfig& cfg) {
  const ChannelMode mode = cfg.channels == 1 ? ChannelMode::Gray : ChannelMode::Native;
  RenderedImage img = read_image(path, mode, cfg.patch_size);
  if (img.channels != cfg.channels)
    throw GeometryError("image has " + std::to_string(img.channels) + " channels, model expects " +
                        std::to_string(cfg.channels));
  return img;
}

std::size_t patch_count(const RenderedImage& img) {
  const std::size_t P = img.patch_size;
  if (img.height % P != 0 || img.width % P != 0) throw GeometryError("image is not tiled by patches");
  return (img.height / P) * (img.width / P);
}

ModelWeights load_model(const RunConfig& rc) {
  if (rc.weights.empty()) throw ConfigError("a weights file is required (--weights or config 'weights')");
  ModelWeights w = load_weights(rc.weights);
  if (!rc.model_config.empty() && !(load_model_config(rc.model_config) == w.config))
    throw ConfigError("model config " + rc.model_config.string() + " does not match the weights file");
  return w;
}

std::string mask_string(const PatchMask& m) {
  std::string s;
  for (auto f : m.flags) s.push_back(f ? '1' : '0');
  return s;
}

// Flags shared by commands that run the model on one input.
struct ModelInputFlags {
  std::string config, weights, input, text, atlas = "builtin", format = "ppm", out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> passes;
  std::optional<double> mask_ratio, dropout;
  bool strict = false;

  void add(CLI::App* sub) {
    sub->add_option("--config", config, "Run config JSON")->check(CLI::ExistingFile);
    sub->add_option("--weights", weights, "Weights file");
    sub->add_option("--input", input, "Image (.ppm/.png), text file, or JSONL dataset");
    sub->add_option("--text", text, "Text to render instead of --input");
    sub->add_option("--atlas", atlas, "Glyph atlas: builtin or a file path");
    sub->add_option("--format", format, "Image format for outputs: ppm or png");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Seed for masks and passes");
    sub->add_option("--passes", passes, "Number of MC passes");
    sub->add_option("--mask-ratio", mask_ratio, "Mask ratio R");
    sub->add_option("--dropout", dropout, "Dropout rate p for MC passes");
    sub->add_flag("--strict", strict, "Fail on malformed dataset lines");
  }

  RunConfig resolve() const {
    RunConfig rc = config.empty() ? RunConfig{} : load_run_config(config);
    if (!weights.empty()) rc.weights = weights;
    if (!input.empty()) {
      rc.input = input;
      rc.input_kind = input_kind_from_path(rc.input);
    }
    if (!out.empty()) rc.output_dir = out;
    if (seed) rc.seed = *seed;
    if (passes) rc.n_passes = *passes;
    if (dropout) rc.dropout = *dropout;
    if (mask_ratio) {
      rc.mask.ratio = *mask_ratio;
      rc.mask_ratios.clear();
    }
    rc.validate();
    return rc;
  }
};

// ---------------------------------------------------------------- render

struct RenderCmd {
  std::string text, text_file, atlas = "builtin", format = "ppm", out = "pixeluq-out";
  std::size_t max_patches = kDefaultMaxPatches, patch_size = kDefaultPatchSize, wrap = 0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("render", "Render text to a patch strip");
    sub->add_option("--text", text, "Text to render");
    sub->add_option("--text-file", text_file, "File whose contents are rendered")->check(CLI::ExistingFile);
    sub->add_option("--atlas", atlas, "Glyph atlas: builtin or a file path");
    sub->add_option("--max-patches", max_patches, "Maximum number of patches");
    sub->add_option("--patch-size", patch_size, "Patch size in pixels");
    sub->add_option("--wrap", wrap, "Also write a view wrapped to this many patches per row");
    sub->add_option("--format", format, "ppm or png");
    sub->add_option("--out", out, "Output directory");
  }

  int exec(std::ostream& os) const {
    if (text.empty() == text_file.empty()) throw ConfigError("render needs exactly one of --text or --text-file");
    const std::string content = text.empty() ? flatten_text(read_text_file(text_file)) : text;
    const ImageFormat fmt = parse_format(format);
    const GlyphAtlas a = load_atlas(atlas, patch_size);
    const RenderedImage img = render_text(content, a, max_patches);
    fs::create_directories(out);
    Manifest m;
    m.command = "render";
    m.config = {{"atlas", atlas}, {"max_patches", max_patches}, {"patch_size", patch_size}, {"wrap", wrap},
                {"format", format}, {"text_bytes", content.size()}};
    const fs::path strip = fs::path("render") += ext_of(fmt);
    write_image(img, fs::path(out) / strip, fmt);
    m.outputs.push_back(strip);
    if (wrap > 0) {
      const fs::path wrapped = fs::path("render_wrapped") += ext_of(fmt);
      write_image(wrap_strip(img, wrap), fs::path(out) / wrapped, fmt);
      m.outputs.push_back(wrapped);
    }
    m.write(out);
    os << "patches: " << img.num_patches() << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  std::string corpus, dataset_kind = "text", model_config, config, out = "pixeluq-out", optimizer, atlas = "builtin";
  std::optional<std::size_t> steps, batch_size, learner;
  std::optional<double> lr, visible_weight, dropout;
  std::optional<std::uint64_t> seed, init_seed;
  bool strict = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train", "Train a toy masked autoencoder on rendered text");
    sub->add_option("--corpus", corpus, "Text file (one example per line) or JSONL dataset")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--dataset-kind", dataset_kind, "qa, ner or text for JSONL corpora");
    sub->add_option("--model-config", model_config, "Model config JSON")->check(CLI::ExistingFile);
    sub->add_option("--config", config, "Training config JSON (may list learner presets)")->check(CLI::ExistingFile);
    sub->add_option("--learner", learner, "Index of the learner preset to apply");
    sub->add_option("--steps", steps, "Optimizer steps");
    sub->add_option("--batch-size", batch_size, "Examples per step");
    sub->add_option("--lr", lr, "Learning rate");
    sub->add_option("--optimizer", optimizer, "adam or sgd");
    sub->add_option("--visible-weight", visible_weight, "Relative loss weight of visible pixels");
    sub->add_option("--dropout", dropout, "Model dropout rate");
    sub->add_option("--seed", seed, "Training seed");
    sub->add_option("--init-seed", init_seed, "Weight initialization seed (defaults to --seed)");
    sub->add_option("--atlas", atlas, "Glyph atlas: builtin or a file path");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--strict", strict, "Fail on malformed corpus lines");
  }

  int exec(std::ostream& os, std::ostream& es) const {
    ModelConfig cfg;
    TrainOptions opt;
    json applied = json::object();
    if (!config.empty()) {
      json j;
      try {
        std::ifstream in(config);
        in >> j;
      } catch (const json::exception& e) {
        throw ConfigError(config + ": " + e.what());
      }
      try {
        if (j.contains("model")) cfg = j.at("model").get<ModelConfig>();
        opt.steps = j.value("steps", opt.steps);
        opt.batch_size = j.value("batch_size", opt.batch_size);
        opt.lr = j.value("lr", opt.lr);
        if (j.contains("optimizer")) opt.optimizer = j.at("optimizer") == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
        opt.visible_weight = j.value("visible_weight", opt.visible_weight);
        opt.mask_ratio_min = j.value("mask_ratio_min", opt.mask_ratio_min);
        opt.mask_ratio_max = j.value("mask_ratio_max", opt.mask_ratio_max);
        if (j.contains("mask")) opt.mask = j.at("mask").get<MaskSpec>();
        opt.seed = j.value("seed", opt.seed);
        if (learner) {
          const auto& list = j.at("learners");
          if (*learner >= list.size()) throw ConfigError("learner index out of range");
          const auto& l = list.at(*learner);
          opt.batch_size = l.value("batch_size", opt.batch_size);
          opt.lr = l.value("lr", opt.lr);
          cfg.dropout_rate = l.value("dropout", cfg.dropout_rate);
          opt.seed = l.value("seed", opt.seed);
          applied = l;
        }
      } catch (const json::exception& e) {
        throw ConfigError(config + ": " + e.what());
      }
    } else if (learner) {
      throw ConfigError("--learner requires --config with a learners list");
    }
    if (!model_config.empty()) {
      const double keep = cfg.dropout_rate;
      cfg = load_model_config(model_config);
      if (learner) cfg.dropout_rate = keep;
    }
    if (steps) opt.steps = *steps;
    if (batch_size) opt.batch_size = *batch_size;
    if (lr) opt.lr = *lr;
    if (!optimizer.empty()) {
      if (optimizer != "adam" && optimizer != "sgd") throw ConfigError("--optimizer must be adam or sgd");
      opt.optimizer = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    }
    if (visible_weight) opt.visible_weight = *visible_weight;
    if (dropout) cfg.dropout_rate = *dropout;
    if (seed) opt.seed = *seed;
    cfg.validate();

    std::vector<std::string> texts;
    if (input_kind_from_path(corpus) == InputKind::Jsonl) {
      const Dataset ds = ingest_dataset(corpus, dataset_kind, strict);
      for (const auto& w : ds.stats.warnings) es << "warning: " << w << "\n";
      for (const auto& ex : ds.examples) texts.push_back(ex.text);
    } else {
      std::istringstream in(read_text_file(corpus));
      for (std::string line; std::getline(in, line);)
        if (!flatten_text(line).empty()) texts.push_back(flatten_text(line));
    }
    if (texts.empty()) throw EmptyInputError("training corpus has no examples");
    std::vector<PatchSequence> seqs;
    for (const auto& t : texts) seqs.push_back(image_to_patches(render_for_model(t, cfg, atlas)));

    const std::uint64_t iseed = init_seed ? *init_seed : opt.seed;
    const TrainReport rep = train_model(init_weights(cfg, iseed), seqs, opt);

    fs::create_directories(out);
    save_weights(rep.weights, fs::path(out) / "weights.bin");
    std::string csv = "step,loss\r\n";
    for (std::size_t i = 0; i < rep.losses.size(); ++i)
      csv += std::to_string(i) + "," + format_double(rep.losses[i]) + "\r\n";
    write_file(fs::path(out) / "losses.csv", csv);

    Manifest m;
    m.command = "train";
    m.config = {{"model", cfg},
                {"steps", opt.steps},
                {"batch_size", opt.batch_size},
                {"lr", opt.lr},
                {"optimizer", opt.optimizer == OptimizerKind::Sgd ? "sgd" : "adam"},
                {"visible_weight", opt.visible_weight},
                {"mask", opt.mask},
                {"mask_ratio_min", opt.mask_ratio_min},
                {"mask_ratio_max", opt.mask_ratio_max},
                {"corpus_examples", texts.size()},
                {"learner", applied}};
    m.seeds = {{"train", opt.seed}, {"init", iseed}};
    m.outputs = {"weights.bin", "losses.csv"};
    m.write(out);
    const double first = rep.losses.empty() ? 0.0 : rep.losses.front();
    const double last = rep.losses.empty() ? 0.0 : rep.losses.back();
    os << "examples: " << texts.size() << "\nsteps: " << opt.steps << "\ninitial loss: " << first
       << "\nfinal loss: " << last << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- shared input

RenderedImage single_input(const ModelInputFlags& f, const RunConfig& rc, const ModelConfig& cfg) {
  if (!f.text.empty()) return render_for_model(f.text, cfg, f.atlas);
  if (rc.input.empty()) throw ConfigError("an input is required (--input, --text or config 'input')");
  if (rc.input_kind == InputKind::Image) return load_image_for_model(rc.input, cfg);
  if (rc.input_kind == InputKind::Text) return render_for_model(flatten_text(read_text_file(rc.input)), cfg, f.atlas);
  throw ConfigError("this command takes a single image or text input, not a dataset");
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructCmd {
  ModelInputFlags f;
  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("reconstruct", "Mask an input and reconstruct it with one deterministic pass");
    f.add(sub);
  }

  int exec(std::ostream& os) const {
    const RunConfig rc = f.resolve();
    const ModelWeights w = load_model(rc);
    const ImageFormat fmt = parse_format(f.format);
    RenderedImage img = single_input(f, rc, w.config);
    const std::size_t P = w.config.patch_size;
    const bool strip = img.is_strip();
    const RenderedImage s = strip ? img : unwrap_to_strip(img, P);
    const PatchSequence seq = image_to_patches(s);
    const PatchMask mask = sample_span_mask(seq.num_patches, rc.mask, rc.seed);
    RenderedImage pred = forward(w, seq, mask).pred_pixels;

    // visible patches from the input, masked ones from the prediction
    RenderedImage pasted = s, masked_input = s;
    const std::size_t row = P * s.channels;
    for (std::size_t i = 0; i < seq.num_patches; ++i) {
      if (!mask.masked(i)) continue;
      for (std::size_t y = 0; y < P; ++y) {
        std::copy_n(&pred.pixels[pred.index(y, i * P)], row, &pasted.pixels[pasted.index(y, i * P)]);
        std::fill_n(&masked_input.pixels[masked_input.index(y, i * P)], row, 0.5f);
      }
    }
    auto layout = [&](const RenderedImage& x) { return strip ? x : wrap_strip(x, img.width / P); };
    fs::create_directories(rc.output_dir);
    Manifest m;
    m.command = "reconstruct";
    m.config = rc;
    m.seeds = {{"mask", rc.mask.seed}, {"run", rc.seed}};
    for (const auto& [name, im] : std::vector<std::pair<std::string, RenderedImage>>{
             {"input", layout(s)}, {"masked_input", layout(masked_input)}, {"reconstruction", layout(pred)},
             {"reconstruction_pasted", layout(pasted)}}) {
      const fs::path p = fs::path(name) += ext_of(fmt);
      write_image(im, rc.output_dir / p, fmt);
      m.outputs.push_back(p);
    }
    const double mse_all = mse_loss(pred, s);
    const double mse_pasted = mse_loss(pasted, s);
    write_file(rc.output_dir / "reconstruction.json",
               json{{"mse", mse_all},
                    {"mse_pasted", mse_pasted},
                    {"mask", mask_string(mask)},
                    {"realized_ratio", mask.realized_ratio}}
                       .dump(2) + "\n");
    m.outputs.push_back("reconstruction.json");
    m.write(rc.output_dir);
    os << "patches: " << seq.num_patches << "\nmasked: " << mask.masked_count() << "\nmse: " << mse_all
       << "\nmse (visible pasted): " << mse_pasted << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- mc

struct McCmd {
  ModelInputFlags f;
  std::size_t wrap = 0;
  std::string dataset_kind;
  bool keep_passes = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("mc", "Monte Carlo dropout uncertainty for an input or a dataset");
    f.add(sub);
    sub->add_option("--wrap", wrap, "Wrap strip outputs to this many patches per row");
    sub->add_option("--dataset-kind", dataset_kind, "qa, ner or text for JSONL inputs");
  }

  int exec(std::ostream& os, std::ostream& es) const {
    RunConfig rc = f.resolve();
    if (!dataset_kind.empty()) rc.dataset_kind = dataset_kind;
    rc.validate();
    const ModelWeights w = load_model(rc);
    const ImageFormat fmt = parse_format(f.format);
    fs::create_directories(rc.output_dir);
    Manifest m;
    m.command = "mc";
    m.config = rc;
    m.config["weights_config"] = w.config;
    m.seeds = {{"mask", rc.mask.seed}, {"run", rc.seed}, {"base_pass_seed", rc.seed}};
    const MCOptions opt{rc.n_passes, rc.dropout, rc.seed, false};

    if (f.text.empty() && rc.input_kind == InputKind::Jsonl) {
      const Dataset ds = ingest_dataset(rc.input, rc.dataset_kind, f.strict);
      for (const auto& wmsg : ds.stats.warnings) es << "warning: " << wmsg << "\n";
      std::vector<CalibrationRecord> records;
      for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const auto& ex = ds.examples[i];
        const RenderedImage img = render_for_model(ex.text, w.config, f.atlas);
        for (double ratio : rc.ratios()) {
          MaskSpec spec = rc.mask;
          spec.ratio = ratio;
          const PatchMask mask = sample_span_mask(img.num_patches(), spec, mix_seed(rc.seed, i));
          const MCResult r = mc_predict(w, img, mask, opt);
          records.push_back({ex.id, ex.dataset.empty() ? rc.tag : ex.dataset, ex.language, ex.script, ratio,
                             r.sigma_bar, r.rmse, r.gnll});
        }
      }
      export_records_csv(records, rc.output_dir / "records.csv");
      m.outputs.push_back("records.csv");
      m.config["skipped_lines"] = ds.stats.skipped;
      m.write(rc.output_dir);
      os << "examples: " << ds.examples.size() << "\nskipped lines: " << ds.stats.skipped
         << "\nrecords: " << records.size() << "\n";
      if (!records.empty()) {
        double s = 0, e = 0;
        for (const auto& r : records) {
          s += r.sigma_bar;
          e += r.rmse;
        }
        os << "mean sigma_bar: " << s / static_cast<double>(records.size())
           << "\nmean rmse: " << e / static_cast<double>(records.size()) << "\n";
      }
      return 0;
    }

    const RenderedImage img = single_input(f, rc, w.config);
    const PatchMask mask = sample_span_mask(patch_count(img), rc.mask, rc.seed);
    MCResult r = mc_predict(w, img, mask, opt);
    RenderedImage shown = img;
    if (wrap > 0 && img.is_strip()) {
      for (RenderedImage* x : {&r.mean_image, &r.sd_image, &r.uncertainty_map}) *x = wrap_strip(*x, wrap);
      shown = wrap_strip(img, wrap);
    }
    const json extra = {{"tag", rc.tag},
                        {"mask", mask_string(mask)},
                        {"mask_ratio", rc.mask.ratio},
                        {"realized_ratio", mask.realized_ratio},
                        {"mask_seed", rc.mask.seed},
                        {"run_seed", rc.seed},
                        {"config_hash", config_hash(m.config)}};
    for (const auto& p : write_mc_outputs(r, shown, rc.output_dir, fmt, extra))
      m.outputs.push_back(p.lexically_relative(rc.output_dir));
    m.write(rc.output_dir);
    os << "patches: " << mask.size() << "\nmasked: " << mask.masked_count() << "\nsigma_bar: " << r.sigma_bar
       << "\nmse: " << r.mse << "\nrmse: " << r.rmse << "\ngnll: " << r.gnll << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- attention

struct AttentionCmd {
  ModelInputFlags f;
  std::optional<std::size_t> first_k;
  bool cells = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("attention", "MC-averaged attention grids and images");
    f.add(sub);
    sub->add_option("--first-k", first_k, "Tokens shown per cell (CLS included)");
    sub->add_flag("--cells", cells, "Also write one image per layer and head");
  }

  int exec(std::ostream& os) const {
    ModelInputFlags flags = f;
    if (!flags.mask_ratio && flags.config.empty()) flags.mask_ratio = 0.0;
    const RunConfig rc = flags.resolve();
    const ModelWeights w = load_model(rc);
    const ImageFormat fmt = parse_format(f.format);
    const RenderedImage img = single_input(f, rc, w.config);
    const PatchMask mask = sample_span_mask(patch_count(img), rc.mask, rc.seed);
    const AttentionGrid grid = mc_attention(w, img, mask, {rc.n_passes, rc.dropout, rc.seed, false});
    const std::size_t k = first_k ? *first_k : std::min<std::size_t>(16, grid.n_tokens);

    fs::create_directories(rc.output_dir);
    Manifest m;
    m.command = "attention";
    m.config = rc;
    m.config["first_k"] = k;
    m.seeds = {{"mask", rc.mask.seed}, {"run", rc.seed}, {"base_pass_seed", rc.seed}};
    const fs::path gp = fs::path("attention_grid") += ext_of(fmt);
    write_image(model_grid_image(grid, k), rc.output_dir / gp, fmt);
    m.outputs.push_back(gp);
    if (cells) {
      for (std::size_t l = 0; l < grid.layers; ++l)
        for (std::size_t h = 0; h < grid.heads; ++h) {
          const fs::path cp = fs::path("cell_l" + std::to_string(l) + "_h" + std::to_string(h)) += ext_of(fmt);
          write_image(neuron_cell_image(grid, l, h, k), rc.output_dir / cp, fmt);
          m.outputs.push_back(cp);
        }
    }
    {
      std::ofstream csv(rc.output_dir / "attention.csv", std::ios::binary | std::ios::trunc);
      if (!csv) throw IoError("cannot write attention.csv");
      write_attention_csv(grid, csv);
    }
    m.outputs.push_back("attention.csv");
    m.write(rc.output_dir);
    os << "layers: " << grid.layers << "\nheads: " << grid.heads << "\ntokens: " << grid.n_tokens
       << "\npasses: " << grid.n_passes << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- ensembles

void write_distribution_csv(const std::map<std::string, DistributionSummary>& dist, const fs::path& path) {
  std::string csv = "group,count,min,q1,median,q3,max,mean\r\n";
  for (const auto& [g, s] : dist)
    csv += csv_escape(g) + "," + std::to_string(s.count) + "," + format_double(s.min) + "," + format_double(s.q1) +
           "," + format_double(s.median) + "," + format_double(s.q3) + "," + format_double(s.max) + "," +
           format_double(s.mean) + "\r\n";
  write_file(path, csv);
}

struct EnsembleQaCmd {
  std::vector<std::string> models;
  std::string gold, out = "pixeluq-out", group_by = "group";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("ensemble-qa", "Combine QA candidates from several learners");
    sub->add_option("--models", models, "QA output JSONL files, one or more")->required()->check(CLI::ExistingFile);
    sub->add_option("--gold", gold, "Gold answers JSONL")->check(CLI::ExistingFile);
    sub->add_option("--group-by", group_by, "Confidence summary grouping: group or all");
    sub->add_option("--out", out, "Output directory");
  }

  int exec(std::ostream& os) const {
    if (group_by != "group" && group_by != "all") throw ConfigError("--group-by must be group or all");
    std::map<std::string, std::vector<QAModelOutput>> by_question;
    for (const auto& path : models)
      for (auto& o : read_qa_outputs(path)) by_question[o.question_id].push_back(std::move(o));
    std::map<std::string, std::vector<std::string>> golds;
    if (!gold.empty()) golds = read_qa_gold(gold);

    std::vector<EnsembleAnswer> answers;
    std::string lines;
    double f1_sum = 0.0;
    std::size_t f1_n = 0;
    for (const auto& [qid, outs] : by_question) {
      const EnsembleAnswer a = combine_qa(outs);
      json line = {{"question_id", qid},
                   {"answer", a.answer_text},
                   {"normalized", a.normalized_text},
                   {"start", a.start},
                   {"end", a.end},
                   {"confidence", a.avg_confidence},
                   {"support", a.support_count},
                   {"models", outs.size()},
                   {"tier", std::string(to_string(a.fallback_tier))}};
      if (auto it = golds.find(qid); it != golds.end()) {
        const double f1 = qa_token_f1(a.answer_text, it->second);
        line["f1"] = f1;
        f1_sum += f1;
        ++f1_n;
      }
      lines += line.dump() + "\n";
      answers.push_back(a);
    }
    if (answers.empty()) throw EmptyInputError("no QA model outputs found");
    fs::create_directories(out);
    write_file(fs::path(out) / "combined.jsonl", lines);
    const auto dist = confidence_distribution(answers, [&](const EnsembleAnswer& a) {
      return group_by == "all" || a.group.empty() ? std::string("all") : a.group;
    });
    write_distribution_csv(dist, fs::path(out) / "confidence_summary.csv");

    Manifest m;
    m.command = "ensemble-qa";
    m.config = {{"models", models}, {"gold", gold}, {"group_by", group_by}};
    m.outputs = {"combined.jsonl", "confidence_summary.csv"};
    m.write(out);
    os << "questions: " << answers.size() << "\n";
    if (f1_n > 0) os << "token F1: " << f1_sum / static_cast<double>(f1_n) << " (" << f1_n << " with gold)\n";
    for (const auto& [g, s] : dist) os << "confidence[" << g << "]: median " << s.median << ", mean " << s.mean << "\n";
    return 0;
  }
};

struct EnsembleNerCmd {
  std::vector<std::string> models;
  std::string gold, out = "pixeluq-out";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("ensemble-ner", "Average NER logits across learners");
    sub->add_option("--models", models, "NER logits JSONL files, one or more")->required()->check(CLI::ExistingFile);
    sub->add_option("--gold", gold, "Gold BIO labels JSONL")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
  }

  int exec(std::ostream& os) const {
    std::map<std::string, std::vector<NERLogits>> by_sentence;
    for (const auto& path : models)
      for (auto& n : read_ner_logits(path)) by_sentence[n.sentence_id].push_back(std::move(n));
    if (by_sentence.empty()) throw EmptyInputError("no NER logits found");
    std::map<std::string, std::vector<std::string>> golds;
    if (!gold.empty()) golds = read_ner_gold(gold);

    std::string lines;
    std::vector<std::vector<std::string>> pred_all, gold_all;
    for (const auto& [sid, sets] : by_sentence) {
      const auto idx = combine_ner(sets);
      std::vector<std::string> labels;
      for (auto i : idx) labels.push_back(sets.front().classes[i]);
      lines += json{{"sentence_id", sid}, {"labels", labels}, {"models", sets.size()}}.dump() + "\n";
      if (!golds.empty()) {
        auto it = golds.find(sid);
        if (it == golds.end()) throw DataError("sentence " + sid + " has no gold labels");
        if (it->second.size() != labels.size()) throw DataError("sentence " + sid + ": gold length differs");
        pred_all.push_back(labels);
        gold_all.push_back(it->second);
      }
    }
    fs::create_directories(out);
    write_file(fs::path(out) / "combined.jsonl", lines);
    Manifest m;
    m.command = "ensemble-ner";
    m.config = {{"models", models}, {"gold", gold}};
    m.outputs = {"combined.jsonl"};
    os << "sentences: " << by_sentence.size() << "\n";
    if (!golds.empty()) {
      const double f1 = weighted_f1_ner(pred_all, gold_all);
      write_file(fs::path(out) / "scores.json", json{{"weighted_f1", f1}, {"sentences", pred_all.size()}}.dump(2) + "\n");
      m.outputs.push_back("scores.json");
      os << "weighted F1: " << f1 << "\n";
    }
    m.write(out);
    return 0;
  }
};

// ---------------------------------------------------------------- calibrate

std::optional<AxisRange> parse_range(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("range must be 'min,max'");
  try {
    return AxisRange{parse_double(s.substr(0, comma)), parse_double(s.substr(comma + 1))};
  } catch (const FormatError&) {
    throw ConfigError("range must be 'min,max' with numeric bounds");
  }
}

AxisRange data_range(const std::vector<CalibrationRecord>& recs, double CalibrationRecord::*field) {
  double lo = recs.front().*field, hi = lo;
  for (const auto& r : recs) {
    lo = std::min(lo, r.*field);
    hi = std::max(hi, r.*field);
  }
  if (hi == lo) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

struct CalibrateCmd {
  std::string records, out = "pixeluq-out", x_range, y_range;
  std::size_t grid_size = 20;
  double scale = 1.0;
  std::vector<std::string> group_by{"dataset", "script", "language", "mask_ratio"};

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("calibrate", "Calibration analytics over MC records");
    sub->add_option("--records", records, "records.csv from a dataset mc run")->required()->check(CLI::ExistingFile);
    sub->add_option("--grid-size", grid_size, "Hexagons across the x range");
    sub->add_option("--x-range", x_range, "sigma_bar range 'min,max' (default: data range)");
    sub->add_option("--y-range", y_range, "rmse range 'min,max' (default: data range)");
    sub->add_option("--group-by", group_by, "Summary keys");
    sub->add_option("--scale", scale, "Diagonal slope for the underestimation fraction");
    sub->add_option("--out", out, "Output directory");
  }

  int exec(std::ostream& os) const {
    const auto recs = import_records_csv(records);
    if (recs.empty()) throw EmptyInputError("no calibration records in " + records);
    const AxisRange xr = parse_range(x_range).value_or(data_range(recs, &CalibrationRecord::sigma_bar));
    const AxisRange yr = parse_range(y_range).value_or(data_range(recs, &CalibrationRecord::rmse));
    const HexbinResult hb = hexbin_counts(recs, xr, yr, grid_size);
    fs::create_directories(out);
    Manifest m;
    m.command = "calibrate";
    m.config = {{"records", records}, {"grid_size", grid_size}, {"x_range", {xr.min, xr.max}},
                {"y_range", {yr.min, yr.max}}, {"group_by", group_by}, {"scale", scale}};
    export_hexbin_csv(hb, fs::path(out) / "hexbin.csv");
    m.outputs.push_back("hexbin.csv");
    for (const auto& key : group_by) {
      const fs::path p = "summary_" + key + ".csv";
      export_summary_csv(group_summary(recs, key), fs::path(out) / p);
      m.outputs.push_back(p);
    }
    json stats = {{"records", recs.size()},
                  {"in_range", hb.in_range},
                  {"dropped", hb.dropped},
                  {"underestimation_fraction", underestimation_fraction(recs, scale)}};
    try {
      stats["pearson_r"] = pearson_r(recs);
    } catch (const DegenerateInputError&) {
      stats["pearson_r"] = nullptr;
    }
    write_file(fs::path(out) / "calibration.json", stats.dump(2) + "\n");
    m.outputs.push_back("calibration.json");
    m.write(out);
    os << "records: " << recs.size() << "\nin range: " << hb.in_range << "\ndropped: " << hb.dropped
       << "\npearson r: " << (stats["pearson_r"].is_null() ? std::string("undefined") : stats["pearson_r"].dump())
       << "\nunderestimation fraction: " << stats["underestimation_fraction"].get<double>() << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- gradcheck

struct GradcheckCmd {
  std::string model_config, out = "pixeluq-out";
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  double step = 1e-4, tolerance = 1e-3;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
    sub->add_option("--model-config", model_config, "Model config (default: micro)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "First seed");
    sub->add_option("--seeds", seeds, "Number of consecutive seeds");
    sub->add_option("--step", step, "Finite-difference step");
    sub->add_option("--tolerance", tolerance, "Maximum accepted relative error");
    sub->add_option("--out", out, "Output directory");
  }

  int exec(std::ostream& os) const {
    const ModelConfig cfg = model_config.empty() ? micro_config() : load_model_config(model_config);
    if (ModelWeights::zeros(cfg).parameter_count() > 20000)
      throw ConfigError("model too large for an exhaustive gradient check");
    json results = json::array();
    double worst = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
      const auto r = finite_diff_gradcheck(cfg, seed + i, step);
      worst = std::max(worst, r.max_relative_error);
      const double ratio = r.error_norm_step > 0 ? r.error_norm_double_step / r.error_norm_step : 0.0;
      results.push_back({{"seed", seed + i},
                         {"max_relative_error", r.max_relative_error},
                         {"worst_parameter", r.worst_parameter},
                         {"parameters", r.parameters_checked},
                         {"loss", r.loss},
                         {"step_doubling_error_ratio", ratio}});
      os << "seed " << seed + i << ": max relative error " << r.max_relative_error << " at " << r.worst_parameter
         << " (" << r.parameters_checked << " parameters, step-doubling ratio " << ratio << ")\n";
    }
    fs::create_directories(out);
    write_file(fs::path(out) / "gradcheck.json", json{{"results", results}, {"tolerance", tolerance}}.dump(2) + "\n");
    Manifest m;
    m.command = "gradcheck";
    m.config = {{"model", cfg}, {"step", step}, {"tolerance", tolerance}, {"seeds", seeds}};
    m.seeds = {{"first", seed}};
    m.outputs = {"gradcheck.json"};
    m.write(out);
    if (!(worst < tolerance))
      throw NumericsError("max relative error " + std::to_string(worst) + " exceeds " + std::to_string(tolerance));
    os << "ok\n";
    return 0;
  }
};

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Usage:
      return 1;
    case ErrorCategory::Data:
      return 2;
    case ErrorCategory::Numeric:
      return 3;
  }
  return 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pixeluq: uncertainty toolkit for pixel-based language models", "pixeluq"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  RenderCmd render;
  TrainCmd train;
  ReconstructCmd reconstruct;
  McCmd mc;
  AttentionCmd attention;
  EnsembleQaCmd ensemble_qa;
  EnsembleNerCmd ensemble_ner;
  CalibrateCmd calibrate;
  GradcheckCmd gradcheck;
  render.add(app);
  train.add(app);
  reconstruct.add(app);
  mc.add(app);
  attention.add(app);
  ensemble_qa.add(app);
  ensemble_ner.add(app);
  calibrate.add(app);
  gradcheck.add(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "render") return render.exec(out);
    if (name == "train") return train.exec(out, err);
    if (name == "reconstruct") return reconstruct.exec(out);
    if (name == "mc") return mc.exec(out, err);
    if (name == "attention") return attention.exec(out);
    if (name == "ensemble-qa") return ensemble_qa.exec(out);
    if (name == "ensemble-ner") return ensemble_ner.exec(out);
    if (name == "calibrate") return calibrate.exec(out);
    if (name == "gradcheck") return gradcheck.exec(out);
    err << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace pixeluq
