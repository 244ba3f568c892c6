// End-to-end checks of the command-line tool via subprocess invocation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "segmicro/checkpoint.hpp"
#include "segmicro/config.hpp"
#include "segmicro/dataio.hpp"
#include "segmicro/image_io.hpp"
#include "segmicro/trainer.hpp"
#include "support/synthetic.hpp"

#ifndef SEGMICRO_CLI_PATH
#define SEGMICRO_CLI_PATH "segmicro"
#endif

namespace fs = std::filesystem;
using namespace segmicro;
using namespace segmicro::test;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("segmicro_cli_" + std::to_string(Rng(std::random_device{}())
                                                 .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const fs::path capture =
      fs::temp_directory_path() /
      ("segmicro_cli_out_" + std::to_string(Rng(std::random_device{}())
                                                .next_u64()));
  const std::string cmd = std::string(SEGMICRO_CLI_PATH) + " " + args +
                          " > " + capture.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (stdout_text) {
    std::ifstream in(capture);
    std::ostringstream buf;
    buf << in.rdbuf();
    *stdout_text = buf.str();
  }
  std::error_code ec;
  fs::remove(capture, ec);
  return rc;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("params prints the exact published counts") {
  TempDir tmp;
  write_file(tmp.path / "unet.json", R"({
    "schema": 1, "seed": 1,
    "model": {"arch": "unet", "num_channels": 1, "num_classes": 3,
              "filters": [16, 32, 64, 128, 256], "conv_kernel": 3,
              "deconv_kernel": 2, "out_kernel": 1}})");
  std::string out;
  CHECK(run_cli("params --config " + (tmp.path / "unet.json").string(),
                &out) == 0);
  CHECK(out == "1940851\n");

  write_file(tmp.path / "fcn.json", R"({
    "schema": 1, "seed": 1,
    "model": {"arch": "fcn", "num_channels": 1, "num_classes": 3,
              "filters": [16, 32, 64, 32, 16], "conv_kernel": 5,
              "out_kernel": 1}})");
  CHECK(run_cli("params --config " + (tmp.path / "fcn.json").string(),
                &out) == 0);
  CHECK(out == "128611\n");

  write_file(tmp.path / "fcn5.json", R"({
    "schema": 1, "seed": 1,
    "model": {"arch": "fcn", "num_channels": 1, "num_classes": 3,
              "filters": [8, 16, 32, 16, 8], "conv_kernel": 3,
              "out_kernel": 5}})");
  CHECK(run_cli("params --config " + (tmp.path / "fcn5.json").string(),
                &out) == 0);
  CHECK(out == "12275\n");
}

TEST_CASE("invalid config exits nonzero and leaves no output") {
  TempDir tmp;
  write_file(tmp.path / "bad.json", R"({"schema": 1, "mdoel": {}})");
  std::string out;
  CHECK(run_cli("params --config " + (tmp.path / "bad.json").string(),
                &out) != 0);
  CHECK(out.find("mdoel") != std::string::npos);
}

TEST_CASE("gen-data writes the manifest and reruns bit-identically") {
  TempDir tmp;
  const Dataset originals = make_blob_dataset(4, 24, 77);
  write_dataset(originals, (tmp.path / "orig").string());
  write_file(tmp.path / "config.json", R"({
    "schema": 1, "seed": 5,
    "data": {"multiplier": 3, "target_size": [24, 24], "equalize": false}})");

  const std::string base = "gen-data --config " +
                           (tmp.path / "config.json").string() +
                           " --originals " + (tmp.path / "orig").string();
  CHECK(run_cli(base + " --out " + (tmp.path / "a").string()) == 0);
  CHECK(run_cli(base + " --out " + (tmp.path / "b").string()) == 0);

  const Dataset a = read_manifest((tmp.path / "a" / "manifest.json").string());
  CHECK(a.size() == 12);

  // Identical manifest bytes (same hash) and identical sample files.
  CHECK(slurp(tmp.path / "a" / "manifest.json") ==
        slurp(tmp.path / "b" / "manifest.json"));
  CHECK(config_hash_hex(slurp(tmp.path / "a" / "manifest.json")) ==
        config_hash_hex(slurp(tmp.path / "b" / "manifest.json")));
  CHECK(slurp(tmp.path / "a" / "images" / "blob_0_1.png") ==
        slurp(tmp.path / "b" / "images" / "blob_0_1.png"));

  SUBCASE("an existing output directory is refused") {
    CHECK(run_cli(base + " --out " + (tmp.path / "a").string()) != 0);
  }
}

TEST_CASE("train, evaluate and predict work end to end") {
  TempDir tmp;
  const Dataset data = make_blob_dataset(8, 32, 99);
  write_dataset(data, (tmp.path / "train").string());
  const Dataset test_data = make_blob_dataset(2, 32, 123);
  write_dataset(test_data, (tmp.path / "test").string());

  const std::string config = R"({
  "schema": 1,
  "seed": 3,
  "model": {"arch": "fcn", "num_channels": 1, "num_classes": 3,
            "filters": [4, 8, 4], "conv_kernel": 3, "out_kernel": 1},
  "optimizer": {"kind": "adam"},
  "training": {"batch_size": 2, "max_epochs": 3},
  "data": {
    "train_manifest": ")" + (tmp.path / "train" / "manifest.json").string() +
                             R"(",
    "test_manifest": ")" + (tmp.path / "test" / "manifest.json").string() +
                             R"(",
    "val_fraction": 0.25
  }
})";
  write_file(tmp.path / "config.json", config);

  CHECK(run_cli("train --config " + (tmp.path / "config.json").string() +
                " --out " + (tmp.path / "runs").string()) == 0);

  const fs::path run_dir = tmp.path / "runs" / config_hash_hex(config);
  REQUIRE(fs::exists(run_dir / "history.csv"));
  REQUIRE(fs::exists(run_dir / "checkpoint.bin"));
  REQUIRE(fs::exists(run_dir / "metrics.json"));
  REQUIRE(fs::exists(run_dir / "config.json"));

  const std::string history = slurp(run_dir / "history.csv");
  CHECK(history.rfind("epoch,train_loss,train_acc,val_loss,val_acc,lr,"
                      "seconds\n", 0) == 0);

  SUBCASE("cli evaluate matches the library evaluation byte for byte") {
    std::string out;
    CHECK(run_cli("evaluate --checkpoint " +
                      (run_dir / "checkpoint.bin").string() + " --manifest " +
                      (tmp.path / "test" / "manifest.json").string(),
                  &out) == 0);
    const LoadedCheckpoint loaded =
        load_checkpoint((run_dir / "checkpoint.bin").string());
    const Dataset test_set =
        read_manifest((tmp.path / "test" / "manifest.json").string());
    CHECK(out == evaluate(loaded.graph, test_set).to_json());
    CHECK(out.find("\"dice.1\"") != std::string::npos);
    CHECK(out.find("\"dice.2\"") != std::string::npos);
  }

  SUBCASE("predict emits a paletted map and per-class counts") {
    const fs::path out_png = tmp.path / "pred.png";
    CHECK(run_cli("predict --checkpoint " +
                      (run_dir / "checkpoint.bin").string() + " --image " +
                      (tmp.path / "test" / "images" / "blob_0.png").string() +
                      " --output " + out_png.string()) == 0);
    REQUIRE(fs::exists(out_png));
    REQUIRE(fs::exists(out_png.string() + ".json"));

    const PngImage png = read_png_gray(out_png.string());
    CHECK(png.paletted);
    CHECK(png.height == 32);
    CHECK(png.width == 32);

    const std::string sidecar = slurp(out_png.string() + ".json");
    CHECK(sidecar.find("counts") != std::string::npos);
  }
}

TEST_CASE("gradcheck passes on the built-in tiny models") {
  std::string out;
  CHECK(run_cli("gradcheck", &out) == 0);
  CHECK(out.find("tiny fcn") != std::string::npos);
  CHECK(out.find("tiny unet") != std::string::npos);
  CHECK(out.find("max rel error") != std::string::npos);  // per-layer lines
  CHECK(out.find("FAIL") == std::string::npos);

  // An absurdly tight tolerance must fail with a nonzero exit code.
  CHECK(run_cli("gradcheck --tolerance 1e-13", &out) != 0);
}

TEST_CASE("augment applies the transform and writes both outputs") {
  TempDir tmp;
  const Dataset data = make_blob_dataset(1, 24, 5);
  write_dataset(data, (tmp.path / "d").string());
  write_file(tmp.path / "config.json", R"({
    "schema": 1, "seed": 9,
    "data": {"target_size": [24, 24], "equalize": false}})");

  CHECK(run_cli("augment --config " + (tmp.path / "config.json").string() +
                " --image " + (tmp.path / "d" / "images" / "blob_0.png")
                                  .string() +
                " --mask " + (tmp.path / "d" / "masks" / "blob_0.png")
                                 .string() +
                " --out " + (tmp.path / "aug").string()) == 0);
  CHECK(fs::exists(tmp.path / "aug" / "blob_0_aug.png"));
  CHECK(fs::exists(tmp.path / "aug" / "blob_0_aug_mask.png"));
}
