#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "segmicro/dataio.hpp"
#include "segmicro/image_io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace segmicro;
using namespace segmicro::test;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("segmicro_test_" + std::to_string(Rng(std::random_device{}())
                                                  .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("combine_masks encodes background/cells/nuclei with precedence") {
  LabelMap cells(2, 2, 2), nuclei(2, 2, 2);
  cells.labels = {1, 1, 0, 0};
  nuclei.labels = {1, 0, 1, 0};
  const LabelMap merged = combine_masks(cells, nuclei);
  CHECK(merged.labels == std::vector<std::uint8_t>{2, 1, 2, 0});
  CHECK(merged.num_classes == 3);

  LabelMap wrong(3, 2, 2);
  CHECK_THROWS_AS(combine_masks(cells, wrong), ShapeError);
}

TEST_CASE("remap_labels sends 4 to 3 and is idempotent") {
  LabelMap mask(1, 5, 5);
  mask.labels = {0, 1, 2, 4, 4};
  const LabelMap once = remap_labels(mask);
  CHECK(once.labels == std::vector<std::uint8_t>{0, 1, 2, 3, 3});
  CHECK(once.num_classes == 4);

  const LabelMap twice = remap_labels(once);
  CHECK(twice.labels == once.labels);

  LabelMap bad(1, 1, 6);
  bad.labels = {5};  // outside {0,1,2,4} and the remapped domain
  CHECK_THROWS_WITH_AS(remap_labels(bad), doctest::Contains("5"), DataError);
}

TEST_CASE("stack_modalities fixes channel order and pads to multiples of 16") {
  SUBCASE("240x240 axial stays unpadded") {
    Tensor4<float> t1({1, 240, 240, 1}, 0.1f);
    Tensor4<float> t1ce({1, 240, 240, 1}, 0.2f);
    Tensor4<float> t2({1, 240, 240, 1}, 0.3f);
    Tensor4<float> flair({1, 240, 240, 1}, 0.4f);
    const auto stack = stack_modalities(t1, t1ce, t2, flair);
    CHECK(stack.shape() == Shape4{1, 240, 240, 4});
    CHECK(stack.at(0, 100, 100, 1) == 0.2f);  // channel 1 is t1ce
  }
  SUBCASE("240x155 sagittal pads width to 160") {
    Rng rng(81);
    const auto t1 = random_tensor<float>({1, 240, 155, 1}, rng, 0.0, 1.0);
    const auto t1ce = random_tensor<float>({1, 240, 155, 1}, rng, 0.0, 1.0);
    const auto t2 = random_tensor<float>({1, 240, 155, 1}, rng, 0.0, 1.0);
    const auto flair = random_tensor<float>({1, 240, 155, 1}, rng, 0.0, 1.0);
    const auto stack = stack_modalities(t1, t1ce, t2, flair);
    CHECK(stack.shape() == Shape4{1, 240, 160, 4});
    // Unpadded region carries the inputs bit-exactly; padding is zero.
    for (int y = 0; y < 240; ++y) {
      for (int x = 0; x < 155; ++x) {
        CHECK(stack.at(0, y, x, 0) == t1.at(0, y, x, 0));
        CHECK(stack.at(0, y, x, 3) == flair.at(0, y, x, 0));
      }
      for (int x = 155; x < 160; ++x) {
        CHECK(stack.at(0, y, x, 2) == 0.0f);
      }
    }
  }
  SUBCASE("shape mismatch is rejected") {
    Tensor4<float> a({1, 240, 240, 1});
    Tensor4<float> b({1, 240, 155, 1});
    CHECK_THROWS_AS(stack_modalities(a, a, a, b), ShapeError);
  }
}

TEST_CASE("generate_dataset cardinality equals originals times multiplier") {
  const Dataset originals = make_blob_dataset(12, 32, 2025);
  AugmentPolicy policy;
  policy.target_height = 32;
  policy.target_width = 32;
  policy.equalize = false;

  SUBCASE("the published multipliers") {
    CHECK(generate_dataset(originals, policy, 8, 1).size() == 96);
    CHECK(generate_dataset(originals, policy, 32, 1).size() == 384);
  }
  SUBCASE("multiplier 1 keeps preprocessed copies only") {
    const Dataset out = generate_dataset(originals, policy, 1, 1);
    CHECK(out.size() == 12);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.samples[i].mask.labels == originals.samples[i].mask.labels);
    }
  }
  SUBCASE("generation is deterministic in the seed") {
    const Dataset a = generate_dataset(originals, policy, 3, 77);
    const Dataset b = generate_dataset(originals, policy, 3, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.samples[i].mask.labels == b.samples[i].mask.labels);
    }
  }
}

TEST_CASE("split sizes follow the ceil rule") {
  auto sized_dataset = [](int n) {
    Dataset d;
    d.num_classes = 3;
    d.num_channels = 1;
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.image = Tensor4<float>({1, 2, 2, 1});
      s.mask = LabelMap(2, 2, 3);
      s.id = "s" + std::to_string(i);
      d.samples.push_back(std::move(s));
    }
    return d;
  };

  const auto [t96, v96] = split_train_val(sized_dataset(96), 0.1, 1);
  CHECK(t96.size() == 86);
  CHECK(v96.size() == 10);

  const auto [t384, v384] = split_train_val(sized_dataset(384), 0.1, 1);
  CHECK(t384.size() == 345);
  CHECK(v384.size() == 39);

  const auto [t1536, v1536] = split_train_val(sized_dataset(1536), 0.1, 1);
  CHECK(t1536.size() == 1382);
  CHECK(v1536.size() == 154);

  SUBCASE("disjoint, exhaustive and seed-reproducible") {
    const Dataset d = sized_dataset(25);
    const auto [ta, va] = split_train_val(d, 0.1, 42);
    const auto [tb, vb] = split_train_val(d, 0.1, 42);
    std::set<std::string> ids;
    for (const auto& s : ta.samples) ids.insert(s.id);
    for (const auto& s : va.samples) ids.insert(s.id);
    CHECK(ids.size() == 25);
    for (std::size_t i = 0; i < ta.size(); ++i) {
      CHECK(ta.samples[i].id == tb.samples[i].id);
    }
    for (std::size_t i = 0; i < va.size(); ++i) {
      CHECK(va.samples[i].id == vb.samples[i].id);
    }
  }
  CHECK_THROWS_AS(split_train_val(sized_dataset(4), 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_val(sized_dataset(4), 1.0, 1), ConfigError);
}

TEST_CASE("png sample round-trip") {
  TempDir tmp;
  Rng rng(91);
  Sample sample;
  sample.image = random_tensor<float>({1, 13, 17, 1}, rng, 0.0, 1.0);
  sample.mask = LabelMap(13, 17, 3);
  for (auto& v : sample.mask.labels) {
    v = static_cast<std::uint8_t>(rng.index(3));
  }
  sample.id = "roundtrip";

  const auto image_path = (tmp.path / "img.png").string();
  const auto mask_path = (tmp.path / "mask.png").string();
  write_sample(sample, image_path, mask_path);
  const Sample back = read_sample(image_path, mask_path, 3);

  CHECK(back.mask.labels == sample.mask.labels);  // masks are exact
  REQUIRE(back.image.shape() == sample.image.shape());
  for (std::size_t i = 0; i < back.image.size(); ++i) {
    // 16-bit quantization bound.
    CHECK(std::abs(back.image[i] - sample.image[i]) <= 0.5f / 65535.0f + 1e-7f);
  }
}

TEST_CASE("all-zero mask reads as all background") {
  TempDir tmp;
  Sample sample;
  sample.image = Tensor4<float>({1, 4, 4, 1}, 0.5f);
  sample.mask = LabelMap(4, 4, 3);
  sample.id = "zeros";
  const auto image_path = (tmp.path / "img.png").string();
  const auto mask_path = (tmp.path / "mask.png").string();
  write_sample(sample, image_path, mask_path);
  const Sample back = read_sample(image_path, mask_path, 3);
  for (const auto v : back.mask.labels) CHECK(v == 0);
}

TEST_CASE("mask with labels outside the class domain is rejected") {
  TempDir tmp;
  Sample sample;
  sample.image = Tensor4<float>({1, 2, 2, 1}, 0.5f);
  sample.mask = LabelMap(2, 2, 4);
  sample.mask.labels = {0, 1, 2, 3};
  sample.id = "bad";
  const auto image_path = (tmp.path / "img.png").string();
  const auto mask_path = (tmp.path / "mask.png").string();
  write_sample(sample, image_path, mask_path);
  CHECK_THROWS_AS(read_sample(image_path, mask_path, 3), DataError);
}

TEST_CASE("16-bit white reads as 1.0") {
  TempDir tmp;
  const auto path = (tmp.path / "white.png").string();
  write_png_gray16(path, 2, 2, {65535, 65535, 65535, 65535});
  const PngImage png = read_png_gray(path);
  CHECK(png.bit_depth == 16);
  CHECK(normalize_u16(png.pixels[0]) == 1.0f);
}

TEST_CASE("raw slice round-trip is bit-exact") {
  TempDir tmp;
  Rng rng(92);
  const auto image = random_tensor<float>({1, 6, 5, 4}, rng, 0.0, 1.0);
  const auto path = (tmp.path / "slice.raw").string();
  write_raw_image(path, image, "none", "patient_1");

  const RawSlice slice = read_raw_slice(path);
  CHECK_FALSE(slice.is_mask);
  CHECK(slice.id == "patient_1");
  REQUIRE(slice.image.shape() == image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) {
    CHECK(slice.image[i] == image[i]);
  }

  LabelMap mask(6, 5, 4);
  for (auto& v : mask.labels) v = static_cast<std::uint8_t>(rng.index(4));
  const auto mask_path = (tmp.path / "mask.raw").string();
  write_raw_mask(mask_path, mask, "patient_1");
  const RawSlice mslice = read_raw_slice(mask_path);
  CHECK(mslice.is_mask);
  CHECK(mslice.mask.labels == mask.labels);

  SUBCASE("truncated payloads are rejected") {
    const auto trunc_path = (tmp.path / "trunc.raw").string();
    fs::copy_file(path, trunc_path);
    fs::resize_file(trunc_path, fs::file_size(trunc_path) / 2);
    CHECK_THROWS_AS(read_raw_slice(trunc_path), DataError);
  }
}

TEST_CASE("dataset write and manifest read round-trip") {
  TempDir tmp;
  const Dataset dataset = make_blob_dataset(3, 16, 7);
  const std::string manifest =
      write_dataset(dataset, (tmp.path / "out").string());
  CHECK(fs::exists(manifest));

  const Dataset back = read_manifest(manifest);
  CHECK(back.size() == 3);
  CHECK(back.num_classes == 3);
  CHECK(back.num_channels == 1);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.samples[i].mask.labels == dataset.samples[i].mask.labels);
  }
}

TEST_CASE("multi-channel datasets round-trip through raw files") {
  TempDir tmp;
  Dataset dataset;
  dataset.num_classes = 4;
  dataset.num_channels = 4;
  Rng rng(93);
  for (int i = 0; i < 2; ++i) {
    Sample s;
    s.image = random_tensor<float>({1, 16, 16, 4}, rng, 0.0, 1.0);
    s.mask = LabelMap(16, 16, 4);
    for (auto& v : s.mask.labels) v = static_cast<std::uint8_t>(rng.index(4));
    s.id = "mm_" + std::to_string(i);
    dataset.samples.push_back(std::move(s));
  }
  const std::string manifest =
      write_dataset(dataset, (tmp.path / "mm").string());
  const Dataset back = read_manifest(manifest);
  CHECK(back.num_channels == 4);
  for (std::size_t i = 0; i < back.size(); ++i) {
    for (std::size_t j = 0; j < back.samples[i].image.size(); ++j) {
      CHECK(back.samples[i].image[j] == dataset.samples[i].image[j]);
    }
    CHECK(back.samples[i].mask.labels == dataset.samples[i].mask.labels);
  }
}
