#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segmicro/labelmap.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro {

// Decoded grayscale or paletted PNG. For paletted files `pixels` holds the
// palette indices; `max_value` is 255 or 65535 for grayscale and the palette
// size - 1 for indexed files.
struct PngImage {
  int height = 0;
  int width = 0;
  int bit_depth = 8;
  bool paletted = false;
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> pixels;  // row-major
};

PngImage read_png_gray(const std::string& path);

void write_png_gray16(const std::string& path, int height, int width,
                      const std::vector<std::uint16_t>& pixels);

void write_png_palette(const std::string& path, int height, int width,
                       const std::vector<std::uint8_t>& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

// Fixed label palette: 0 black, 1 mid-gray, 2 white, 3 light-gray.
const std::vector<std::array<std::uint8_t, 3>>& label_palette();

// Raw slice container for multi-modal data: an 8-line text header (magic,
// height, width, channels, dtype, scale, label-domain, id) followed by
// little-endian payload planes. dtype f32 stores channel planes of image
// data; dtype u8 stores one label plane.
struct RawSlice {
  bool is_mask = false;
  std::string scale = "none";  // none | minmax (applied on read)
  std::string id;
  Tensor4<float> image;  // single batch, (1, H, W, C); empty for masks
  LabelMap mask;         // empty for images
};

RawSlice read_raw_slice(const std::string& path);
void write_raw_image(const std::string& path, const Tensor4<float>& image,
                     const std::string& scale, const std::string& id);
void write_raw_mask(const std::string& path, const LabelMap& mask,
                    const std::string& id);

}  // namespace segmicro
