#include "segmicro/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "segmicro/image_io.hpp"
#include "segmicro/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace segmicro {

namespace {

int next_multiple_of_16(int v) { return ((v + 15) / 16) * 16; }

void check_same_maps(const LabelMap& a, const LabelMap& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": mask shapes differ, " +
                     std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

}  // namespace

LabelMap combine_masks(const LabelMap& cells, const LabelMap& nuclei) {
  check_same_maps(cells, nuclei, "combine_masks");
  LabelMap out(cells.height, cells.width, 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (nuclei.labels[i]) {
      out.labels[i] = 2;  // nuclei lie inside cells and take precedence
    } else if (cells.labels[i]) {
      out.labels[i] = 1;
    }
  }
  return out;
}

LabelMap remap_labels(const LabelMap& mask) {
  LabelMap out(mask.height, mask.width, 4);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::uint8_t v = mask.labels[i];
    if (v == 4) {
      out.labels[i] = 3;
    } else if (v <= 3) {  // 3 passes through so the remap is idempotent
      out.labels[i] = v;
    } else {
      throw DataError("remap_labels: unexpected label value " +
                      std::to_string(v) + " (domain is {0,1,2,4})");
    }
  }
  return out;
}

Tensor4<float> stack_modalities(const Tensor4<float>& t1,
                                const Tensor4<float>& t1ce,
                                const Tensor4<float>& t2,
                                const Tensor4<float>& flair) {
  const Tensor4<float>* mods[4] = {&t1, &t1ce, &t2, &flair};
  const Shape4& s = t1.shape();
  for (const auto* m : mods) {
    if (m->shape().channels != 1 || m->shape().batch != 1) {
      throw ShapeError("stack_modalities expects single-channel slices, got " +
                       m->shape().to_string());
    }
    require_same_shape(m->shape(), s, "stack_modalities");
  }
  const int oh = next_multiple_of_16(s.height);
  const int ow = next_multiple_of_16(s.width);
  Tensor4<float> out({1, oh, ow, 4});
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        out.at(0, y, x, c) = mods[c]->at(0, y, x, 0);
      }
    }
  }
  return out;
}

Dataset generate_dataset(const Dataset& originals, const AugmentPolicy& policy,
                         int multiplier, std::uint64_t seed) {
  if (multiplier < 1) {
    throw ConfigError("generate_dataset: multiplier must be >= 1, got " +
                      std::to_string(multiplier));
  }
  policy.validate();

  Dataset out;
  out.num_classes = originals.num_classes;
  out.num_channels = originals.num_channels;
  out.note = "generated x" + std::to_string(multiplier) + " from " +
             std::to_string(originals.size()) + " originals";

  for (std::size_t i = 0; i < originals.size(); ++i) {
    const Sample& src = originals.samples[i];
    Tensor4<float> pre = src.image;
    if (policy.equalize) {
      if (pre.shape().channels == 1) {
        pre = equalize(pre);
      } else {
        // Multi-channel data is equalized per channel plane.
        const Shape4& s = pre.shape();
        Tensor4<float> merged(s);
        for (int c = 0; c < s.channels; ++c) {
          Tensor4<float> plane({1, s.height, s.width, 1});
          for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
              plane.at(0, y, x, 0) = pre.at(0, y, x, c);
          plane = equalize(plane);
          for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
              merged.at(0, y, x, c) = plane.at(0, y, x, 0);
        }
        pre = std::move(merged);
      }
    }

    const int th =
        policy.target_height > 0 ? policy.target_height : pre.shape().height;
    const int tw =
        policy.target_width > 0 ? policy.target_width : pre.shape().width;

    Sample first;
    first.image = resize_bilinear(pre, th, tw);
    first.mask = resize_nearest(src.mask, th, tw);
    first.id = src.id + "_0";
    out.samples.push_back(std::move(first));

    for (int j = 1; j < multiplier; ++j) {
      const std::uint64_t sample_index = i * multiplier + j;
      auto [img, msk] = transform(pre, src.mask, policy, seed + sample_index);
      Sample gen;
      gen.image = std::move(img);
      gen.mask = std::move(msk);
      gen.id = src.id + "_" + std::to_string(j);
      out.samples.push_back(std::move(gen));
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double fraction,
                                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split_train_val: fraction must lie in (0, 1), got " +
                      std::to_string(fraction));
  }
  const std::size_t n = dataset.size();
  const std::size_t val_count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with our own draws; std::shuffle is implementation-defined.
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.index(i));
    std::swap(order[i - 1], order[j]);
  }

  Dataset train, val;
  train.num_classes = val.num_classes = dataset.num_classes;
  train.num_channels = val.num_channels = dataset.num_channels;
  train.note = dataset.note;
  val.note = dataset.note;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = dataset.samples[order[i]];
    if (i < val_count) {
      val.samples.push_back(s);
    } else {
      train.samples.push_back(s);
    }
  }
  return {std::move(train), std::move(val)};
}

namespace {

Tensor4<float> image_from_png(const PngImage& png) {
  Tensor4<float> out({1, png.height, png.width, 1});
  float* o = out.data();
  if (png.bit_depth == 16) {
    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
      o[i] = normalize_u16(png.pixels[i]);
    }
  } else {
    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
      o[i] = normalize_u8(static_cast<std::uint8_t>(png.pixels[i]));
    }
  }
  return out;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Sample read_sample(const std::string& image_path, const std::string& mask_path,
                   int num_classes) {
  Sample sample;

  if (has_suffix(image_path, ".raw")) {
    RawSlice slice = read_raw_slice(image_path);
    if (slice.is_mask) {
      throw DataError("'" + image_path + "' holds a mask, expected an image");
    }
    sample.image = std::move(slice.image);
    sample.id = slice.id;
  } else {
    const PngImage png = read_png_gray(image_path);
    if (png.paletted) {
      throw DataError("'" + image_path +
                      "' is paletted; images must be grayscale");
    }
    sample.image = image_from_png(png);
    sample.id = fs::path(image_path).stem().string();
  }

  if (has_suffix(mask_path, ".raw")) {
    RawSlice slice = read_raw_slice(mask_path);
    if (!slice.is_mask) {
      throw DataError("'" + mask_path + "' holds an image, expected a mask");
    }
    sample.mask = std::move(slice.mask);
    sample.mask.num_classes = num_classes;
  } else {
    const PngImage png = read_png_gray(mask_path);
    sample.mask = LabelMap(png.height, png.width, num_classes);
    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
      sample.mask.labels[i] = static_cast<std::uint8_t>(png.pixels[i]);
    }
  }

  const Shape4& s = sample.image.shape();
  if (s.height != sample.mask.height || s.width != sample.mask.width) {
    throw DataError("sample '" + sample.id + "': image " + s.to_string() +
                    " and mask " + std::to_string(sample.mask.height) + "x" +
                    std::to_string(sample.mask.width) + " disagree");
  }
  for (const std::uint8_t v : sample.mask.labels) {
    if (v >= num_classes) {
      throw DataError("mask '" + mask_path + "' has label " +
                      std::to_string(v) + " >= num_classes " +
                      std::to_string(num_classes));
    }
  }
  return sample;
}

void write_sample(const Sample& sample, const std::string& image_path,
                  const std::string& mask_path) {
  const Shape4& s = sample.image.shape();
  if (has_suffix(image_path, ".raw")) {
    write_raw_image(image_path, sample.image, "none", sample.id);
  } else {
    if (s.channels != 1) {
      throw DataError("multi-channel sample '" + sample.id +
                      "' must be written as .raw, not PNG");
    }
    std::vector<std::uint16_t> pixels(sample.image.size());
    const float* in = sample.image.data();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const float v = std::clamp(in[i], 0.0f, 1.0f);
      pixels[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    }
    write_png_gray16(image_path, s.height, s.width, pixels);
  }

  if (has_suffix(mask_path, ".raw")) {
    write_raw_mask(mask_path, sample.mask, sample.id);
  } else {
    auto palette = label_palette();
    const int classes = std::max(sample.mask.num_classes, 1);
    while (static_cast<int>(palette.size()) < classes) {
      // Extra classes beyond the fixed palette get an even gray ramp.
      const auto g = static_cast<std::uint8_t>(
          255 * palette.size() / (classes > 1 ? classes - 1 : 1));
      palette.push_back({g, g, g});
    }
    write_png_palette(mask_path, sample.mask.height, sample.mask.width,
                      sample.mask.labels, palette);
  }
}

Dataset read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest '" + manifest_path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest_path + "': " + e.what());
  }

  for (const auto& key : {"num_classes", "num_channels", "samples"}) {
    if (!doc.contains(key)) {
      throw DataError("manifest '" + manifest_path + "' is missing '" +
                      std::string(key) + "'");
    }
  }

  Dataset out;
  try {
    out.num_classes = doc["num_classes"].get<int>();
    out.num_channels = doc["num_channels"].get<int>();
    out.note = doc.value("note", "");

    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& entry : doc["samples"]) {
      const std::string image_rel = entry.at("image").get<std::string>();
      const std::string mask_rel = entry.at("mask").get<std::string>();
      Sample s = read_sample((base / image_rel).string(),
                             (base / mask_rel).string(), out.num_classes);
      s.id = entry.value("id", s.id);
      if (entry.contains("valid_size")) {
        s.valid_height = entry["valid_size"][0].get<int>();
        s.valid_width = entry["valid_size"][1].get<int>();
      }
      if (s.image.shape().channels != out.num_channels) {
        throw DataError("sample '" + s.id + "' has " +
                        std::to_string(s.image.shape().channels) +
                        " channels, manifest declares " +
                        std::to_string(out.num_channels));
      }
      out.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest_path + "': " + e.what());
  }
  return out;
}

void write_manifest(const std::string& manifest_path, const Dataset& dataset,
                    const std::vector<std::pair<std::string, std::string>>&
                        relative_paths) {
  if (relative_paths.size() != dataset.size()) {
    throw ShapeError("write_manifest: path list size mismatch");
  }
  json doc;
  doc["schema"] = 1;
  doc["num_classes"] = dataset.num_classes;
  doc["num_channels"] = dataset.num_channels;
  if (!dataset.note.empty()) doc["note"] = dataset.note;
  doc["samples"] = json::array();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset.samples[i];
    json entry;
    entry["id"] = s.id;
    entry["image"] = relative_paths[i].first;
    entry["mask"] = relative_paths[i].second;
    if (s.valid_height > 0 && s.valid_width > 0) {
      entry["valid_size"] = {s.valid_height, s.valid_width};
    }
    doc["samples"].push_back(std::move(entry));
  }
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write manifest '" + manifest_path + "'");
  out << doc.dump(2) << "\n";
}

std::string write_dataset(const Dataset& dataset, const std::string& out_dir) {
  const fs::path root(out_dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");

  const bool raw = dataset.num_channels != 1;
  const char* image_ext = raw ? ".raw" : ".png";
  const char* mask_ext = ".png";

  std::vector<std::pair<std::string, std::string>> rel;
  rel.reserve(dataset.size());
  for (const Sample& s : dataset.samples) {
    const std::string image_rel = "images/" + s.id + image_ext;
    const std::string mask_rel = "masks/" + s.id + mask_ext;
    write_sample(s, (root / image_rel).string(), (root / mask_rel).string());
    rel.emplace_back(image_rel, mask_rel);
  }
  const std::string manifest = (root / "manifest.json").string();
  write_manifest(manifest, dataset, rel);
  return manifest;
}

}  // namespace segmicro
