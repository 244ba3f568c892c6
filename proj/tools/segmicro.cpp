// segmicro: train, evaluate and run small segmentation networks from the
// command line. See README.md for the config file schema.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "segmicro/checkpoint.hpp"
#include "segmicro/config.hpp"
#include "segmicro/dataio.hpp"
#include "segmicro/gradcheck.hpp"
#include "segmicro/graph.hpp"
#include "segmicro/image_io.hpp"
#include "segmicro/metrics.hpp"
#include "segmicro/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace segmicro;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_dir;
  int threads = 1;
};

ExperimentConfig load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty()) {
    throw ConfigError("--config PATH is required for this command");
  }
  ExperimentConfig cfg = load_experiment_config(opts.config_path);
  if (opts.seed_override) {
    cfg.seed = *opts.seed_override;
    if (!cfg.shuffle_seed_explicit) cfg.training.shuffle_seed = cfg.seed;
  }
  return cfg;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Output directories are built under a .tmp suffix and renamed into place so
// failures never leave a partial directory.
class StagedDir {
 public:
  explicit StagedDir(const fs::path& target)
      : target_(target), staging_(target.string() + ".tmp") {
    if (fs::exists(target_)) {
      throw DataError("output directory '" + target_.string() +
                      "' already exists");
    }
    std::error_code ec;
    fs::remove_all(staging_, ec);
    fs::create_directories(staging_);
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  const fs::path& path() const { return staging_; }
  void commit() {
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_gen_data(const GlobalOptions& opts, const std::string& originals_dir) {
  ExperimentConfig cfg = load_config(opts);
  require(cfg.has_data, "config needs a 'data' section for gen-data");
  require(!opts.out_dir.empty(), "--out DIR is required for gen-data");

  const fs::path manifest = fs::path(originals_dir) / "manifest.json";
  if (!fs::exists(manifest)) {
    throw DataError("no manifest.json under '" + originals_dir + "'");
  }
  const Dataset originals = read_manifest(manifest.string());

  StagedDir staged{fs::path(opts.out_dir)};
  const Dataset generated =
      generate_dataset(originals, cfg.data.policy, cfg.data.multiplier,
                       cfg.seed);
  write_dataset(generated, staged.path().string());
  staged.commit();

  std::cout << "originals: " << originals.size() << "\n"
            << "generated: " << generated.size() << " (x"
            << cfg.data.multiplier << ")\n"
            << "manifest: "
            << (fs::path(opts.out_dir) / "manifest.json").string() << "\n";
  return 0;
}

int cmd_augment(const GlobalOptions& opts, const std::string& image_path,
                const std::string& mask_path, int num_classes) {
  ExperimentConfig cfg = load_config(opts);
  require(cfg.has_data, "config needs a 'data' section for augment");
  require(!opts.out_dir.empty(), "--out DIR is required for augment");

  Sample sample = read_sample(image_path, mask_path, num_classes);
  StagedDir staged{fs::path(opts.out_dir)};
  auto [img, msk] = transform(sample.image, sample.mask, cfg.data.policy,
                              cfg.seed);
  Sample out;
  out.image = std::move(img);
  out.mask = std::move(msk);
  out.id = sample.id + "_aug";
  write_sample(out, (staged.path() / (out.id + ".png")).string(),
               (staged.path() / (out.id + "_mask.png")).string());
  staged.commit();
  std::cout << "wrote " << out.id << ".png and " << out.id << "_mask.png to "
            << opts.out_dir << "\n";
  return 0;
}

int cmd_train(const GlobalOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  require(cfg.has_model, "config needs a 'model' section for train");
  require(cfg.has_optimizer, "config needs an 'optimizer' section for train");
  require(cfg.has_training, "config needs a 'training' section for train");
  require(cfg.has_data && !cfg.data.train_manifest.empty(),
          "config needs data.train_manifest for train");
  require(!opts.out_dir.empty(), "--out DIR is required for train");

  const Dataset dataset = read_manifest(cfg.data.train_manifest);
  require(dataset.num_channels == cfg.model.num_channels,
          "dataset has " + std::to_string(dataset.num_channels) +
              " channels, model expects " +
              std::to_string(cfg.model.num_channels));
  require(dataset.num_classes == cfg.model.num_classes,
          "dataset has " + std::to_string(dataset.num_classes) +
              " classes, model expects " +
              std::to_string(cfg.model.num_classes));

  auto [train_set, val_set] =
      split_train_val(dataset, cfg.data.val_fraction, cfg.seed);
  std::cout << "split: " << train_set.size() << " train / " << val_set.size()
            << " val\n";

  const std::string run_id = config_hash_hex(cfg.source_text);
  StagedDir staged{fs::path(opts.out_dir) / run_id};

  Graph<float> graph = Graph<float>::build(cfg.model, cfg.seed);
  Optimizer<float> optimizer(cfg.optimizer_kind, cfg.optimizer_overrides);
  TrainConfig training = cfg.training;
  training.checkpoint_path = (staged.path() / "checkpoint.bin").string();

  const TrainResult result =
      train(graph, optimizer, train_set, val_set, training);
  write_text(staged.path() / "history.csv", result.history.to_csv());
  write_text(staged.path() / "config.json", cfg.source_text);

  // Metrics come from the best checkpoint, on the test set when configured.
  const LoadedCheckpoint best = load_checkpoint(result.checkpoint_path);
  const Dataset eval_set = cfg.data.test_manifest.empty()
                               ? val_set
                               : read_manifest(cfg.data.test_manifest);
  const MetricsReport report =
      evaluate(best.graph, eval_set, opts.threads);
  write_text(staged.path() / "metrics.json", report.to_json());
  staged.commit();

  const fs::path run_dir = fs::path(opts.out_dir) / run_id;
  std::cout << "run: " << run_dir.string() << "\n"
            << "epochs: " << result.history.epochs.size() << " (best "
            << result.history.best_epoch << ", "
            << result.history.stop_reason << ")\n"
            << "eval accuracy: " << report.test_accuracy << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOptions& opts, const std::string& checkpoint_path,
                 const std::string& manifest_path) {
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const Dataset test_set = read_manifest(manifest_path);
  const MetricsReport report =
      evaluate(loaded.graph, test_set, opts.threads);
  const std::string text = report.to_json();
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text(fs::path(opts.out_dir) / "metrics.json", text);
  }
  std::cout << text;
  return 0;
}

int cmd_predict(const std::string& checkpoint_path,
                const std::string& image_path, const std::string& out_path) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);

  Tensor4<float> image;
  if (image_path.size() > 4 &&
      image_path.compare(image_path.size() - 4, 4, ".raw") == 0) {
    RawSlice slice = read_raw_slice(image_path);
    if (slice.is_mask) throw DataError("'" + image_path + "' holds a mask");
    image = std::move(slice.image);
  } else {
    const PngImage png = read_png_gray(image_path);
    if (png.paletted) {
      throw DataError("'" + image_path + "' is paletted; expected grayscale");
    }
    image = Tensor4<float>({1, png.height, png.width, 1});
    float* o = image.data();
    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
      o[i] = png.bit_depth == 16
                 ? normalize_u16(png.pixels[i])
                 : normalize_u8(static_cast<std::uint8_t>(png.pixels[i]));
    }
  }

  const LabelMap map = loaded.graph.predict(image);
  write_png_palette(out_path, map.height, map.width, map.labels,
                    label_palette());

  json counts;
  std::vector<std::int64_t> tally(map.num_classes, 0);
  for (const std::uint8_t v : map.labels) tally[v] += 1;
  for (int c = 0; c < map.num_classes; ++c) {
    counts["counts"][std::to_string(c)] = tally[c];
  }
  write_text(out_path + ".json", counts.dump(2) + "\n");
  std::cout << "wrote " << out_path << " and " << out_path << ".json\n";
  return 0;
}

int cmd_params(const GlobalOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  require(cfg.has_model, "config needs a 'model' section for params");
  Graph<float> graph = Graph<float>::build(cfg.model, cfg.seed);
  std::cout << graph.param_count() << "\n";
  return 0;
}

GradCheckReport run_gradcheck(const ModelConfig& model, double tolerance,
                              std::uint64_t seed) {
  Graph<double> graph = Graph<double>::build(model, seed);
  const int size = model.arch == Arch::UNet ? 16 : 8;

  Rng rng(mix_seed(seed, 7));
  Tensor4<double> input({1, size, size, model.num_channels});
  for (std::size_t i = 0; i < input.size(); ++i) {
    input[i] = rng.real01();
  }
  Tensor4<double> targets({1, size, size, model.num_classes});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int cls = static_cast<int>(rng.index(model.num_classes));
      targets.at(0, y, x, cls) = 1.0;
    }
  }
  return gradcheck_graph(graph, input, targets, tolerance, 24, seed);
}

int cmd_gradcheck(const GlobalOptions& opts, double tolerance) {
  std::vector<std::pair<std::string, ModelConfig>> models;
  if (!opts.config_path.empty()) {
    ExperimentConfig cfg = load_config(opts);
    require(cfg.has_model, "config needs a 'model' section for gradcheck");
    models.emplace_back("configured model", cfg.model);
  } else {
    ModelConfig fcn;
    fcn.arch = Arch::Fcn;
    fcn.filters = {8, 16, 32, 16, 8};
    models.emplace_back("tiny fcn 8/16/32/16/8 k3", fcn);

    ModelConfig unet;
    unet.arch = Arch::UNet;
    unet.filters = {2, 4, 8, 16, 32};
    unet.deconv_kernel = 2;
    models.emplace_back("tiny unet 2/4/8/16/32 k3 d2", unet);
  }

  const std::uint64_t seed = opts.seed_override.value_or(1);
  bool all_passed = true;
  for (const auto& [name, model] : models) {
    std::cout << name << ":\n";
    const GradCheckReport report = run_gradcheck(model, tolerance, seed);
    std::cout << report.to_string();
    all_passed = all_passed && report.passed;
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"small-data semantic segmentation: FCN and U-Net training, "
               "evaluation and prediction"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "experiment config JSON")
      ->expected(1);
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the config seed");
  app.add_option("--out", opts.out_dir, "output directory");
  app.add_option("--threads", opts.threads, "worker threads for evaluation")
      ->envname("SEGMICRO_THREADS");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen-data",
                                 "generate an augmented dataset from "
                                 "originals (manifest.json + images)");
  std::string originals_dir;
  gen->add_option("--originals", originals_dir, "originals directory")
      ->required();

  auto* aug = app.add_subcommand(
      "augment", "apply the stochastic transform to one image/mask pair");
  std::string aug_image, aug_mask;
  int aug_classes = 3;
  aug->add_option("--image", aug_image)->required();
  aug->add_option("--mask", aug_mask)->required();
  aug->add_option("--classes", aug_classes, "number of classes (default 3)");

  app.add_subcommand("train",
                     "train per the config; writes history.csv, "
                     "checkpoint.bin and metrics.json");

  auto* eva = app.add_subcommand("evaluate",
                                 "evaluate a checkpoint on a test manifest");
  std::string eval_checkpoint, eval_manifest;
  eva->add_option("--checkpoint", eval_checkpoint)->required();
  eva->add_option("--manifest", eval_manifest)->required();

  auto* pre = app.add_subcommand("predict",
                                 "predict a label map for one image");
  std::string pred_checkpoint, pred_image, pred_out;
  pre->add_option("--checkpoint", pred_checkpoint)->required();
  pre->add_option("--image", pred_image)->required();
  pre->add_option("--output", pred_out, "output PNG path")->required();

  app.add_subcommand("params",
                     "print the learnable parameter count of the configured "
                     "model");

  auto* gch = app.add_subcommand(
      "gradcheck", "finite-difference check of the backward pass");
  double tolerance = 1e-4;
  gch->add_option("--tolerance", tolerance, "max relative error (1e-4)");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed_override = seed_value;

  try {
    if (gen->parsed()) return cmd_gen_data(opts, originals_dir);
    if (aug->parsed()) return cmd_augment(opts, aug_image, aug_mask,
                                          aug_classes);
    if (app.got_subcommand("train")) return cmd_train(opts);
    if (eva->parsed()) return cmd_evaluate(opts, eval_checkpoint,
                                           eval_manifest);
    if (pre->parsed()) return cmd_predict(pred_checkpoint, pred_image,
                                          pred_out);
    if (app.got_subcommand("params")) return cmd_params(opts);
    if (gch->parsed()) return cmd_gradcheck(opts, tolerance);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
