#include "segmicro/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "segmicro/augment.hpp"

namespace segmicro {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr char kRawMagic[] = "SEGMICRO-RAW1";

void write_le_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(bits & 0xFF),
      static_cast<unsigned char>((bits >> 8) & 0xFF),
      static_cast<unsigned char>((bits >> 16) & 0xFF),
      static_cast<unsigned char>((bits >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_le_f32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

PngImage read_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open '" + path + "'");

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("'" + path + "' is not a PNG file");
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }

  PngImage out;
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.width = static_cast<int>(png_get_image_width(png, info));

  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    out.paletted = true;
    png_set_packing(png);  // expand sub-byte indices to one byte each
    png_colorp palette = nullptr;
    int palette_size = 0;
    png_get_PLTE(png, info, &palette, &palette_size);
    out.max_value = palette_size > 0 ? palette_size - 1 : 255;
    bit_depth = 8;
  } else if (color_type == PNG_COLOR_TYPE_GRAY) {
    if (bit_depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
      bit_depth = 8;
    }
    out.max_value = bit_depth == 16 ? 65535u : 255u;
  } else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path + "' must be a grayscale or paletted PNG "
                    "(color type " + std::to_string(color_type) + ")");
  }
  out.bit_depth = bit_depth;

  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width);
  if (bit_depth == 16) {
    for (int y = 0; y < out.height; ++y) {
      const unsigned char* row = buffer.data() + y * rowbytes;
      for (int x = 0; x < out.width; ++x) {
        out.pixels[static_cast<std::size_t>(y) * out.width + x] =
            static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
      }
    }
  } else {
    for (int y = 0; y < out.height; ++y) {
      const unsigned char* row = buffer.data() + y * rowbytes;
      for (int x = 0; x < out.width; ++x) {
        out.pixels[static_cast<std::size_t>(y) * out.width + x] = row[x];
      }
    }
  }
  return out;
}

void write_png_gray16(const std::string& path, int height, int width,
                      const std::vector<std::uint16_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("write_png_gray16: pixel count does not match " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write '" + path + "'");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }

  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  buffer.resize(static_cast<std::size_t>(height) * width * 2);
  rows.resize(height);
  for (int y = 0; y < height; ++y) {
    unsigned char* row = buffer.data() + static_cast<std::size_t>(y) * width * 2;
    rows[y] = row;
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = pixels[static_cast<std::size_t>(y) * width + x];
      row[2 * x] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xFF);
    }
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png_palette(
    const std::string& path, int height, int width,
    const std::vector<std::uint8_t>& indices,
    const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (indices.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("write_png_palette: pixel count does not match " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (palette.empty() || palette.size() > 256) {
    throw ConfigError("write_png_palette: palette must have 1..256 entries");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write '" + path + "'");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }

  std::vector<png_color> colors(palette.size());
  for (std::size_t i = 0; i < palette.size(); ++i) {
    colors[i] = {palette[i][0], palette[i][1], palette[i][2]};
  }
  std::vector<png_bytep> rows(height);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
  png_write_info(png, info);

  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(indices.data()) +
              static_cast<std::size_t>(y) * width;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

const std::vector<std::array<std::uint8_t, 3>>& label_palette() {
  static const std::vector<std::array<std::uint8_t, 3>> palette = {
      {0, 0, 0},        // 0: background, black
      {128, 128, 128},  // 1: mid-gray
      {255, 255, 255},  // 2: white
      {192, 192, 192},  // 3: light-gray
  };
  return palette;
}

namespace {

struct RawHeader {
  int height = 0, width = 0, channels = 0;
  std::string dtype, scale, labels, id;
};

RawHeader read_raw_header(std::istream& in, const std::string& path) {
  auto next_line = [&](const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw DataError("'" + path + "': truncated raw header (missing " +
                      what + ")");
    }
    return line;
  };
  if (next_line("magic") != kRawMagic) {
    throw DataError("'" + path + "': bad magic, expected " +
                    std::string(kRawMagic));
  }
  auto field = [&](const char* key) {
    const std::string line = next_line(key);
    const std::string prefix = std::string(key) + " ";
    if (line.rfind(prefix, 0) != 0) {
      throw DataError("'" + path + "': expected header line '" +
                      std::string(key) + " ...', got '" + line + "'");
    }
    return line.substr(prefix.size());
  };
  RawHeader h;
  h.height = std::stoi(field("height"));
  h.width = std::stoi(field("width"));
  h.channels = std::stoi(field("channels"));
  h.dtype = field("dtype");
  h.scale = field("scale");
  h.labels = field("labels");
  h.id = field("id");
  if (h.height < 1 || h.width < 1 || h.channels < 1) {
    throw DataError("'" + path + "': invalid raw dimensions");
  }
  return h;
}

}  // namespace

RawSlice read_raw_slice(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const RawHeader h = read_raw_header(in, path);

  RawSlice slice;
  slice.scale = h.scale;
  slice.id = h.id;

  if (h.dtype == "f32") {
    Tensor4<float> image({1, h.height, h.width, h.channels});
    // Payload is one plane per channel.
    for (int c = 0; c < h.channels; ++c) {
      for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
          image.at(0, y, x, c) = read_le_f32(in);
        }
      }
    }
    if (!in) throw DataError("'" + path + "': truncated raw payload");
    slice.image = h.scale == "minmax" ? normalize_minmax(image) : image;
  } else if (h.dtype == "u8") {
    int num_classes = 0;
    std::stringstream labels(h.labels);
    std::string tok;
    while (std::getline(labels, tok, ',')) {
      if (!tok.empty() && tok != "-") {
        num_classes = std::max(num_classes, std::stoi(tok) + 1);
      }
    }
    LabelMap mask(h.height, h.width, num_classes);
    in.read(reinterpret_cast<char*>(mask.labels.data()),
            static_cast<std::streamsize>(mask.labels.size()));
    if (!in) throw DataError("'" + path + "': truncated raw payload");
    slice.is_mask = true;
    slice.mask = std::move(mask);
  } else {
    throw DataError("'" + path + "': unsupported dtype '" + h.dtype + "'");
  }
  return slice;
}

void write_raw_image(const std::string& path, const Tensor4<float>& image,
                     const std::string& scale, const std::string& id) {
  const Shape4& s = image.shape();
  if (s.batch != 1) {
    throw ShapeError("write_raw_image expects a single-batch tensor");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << kRawMagic << "\n"
      << "height " << s.height << "\n"
      << "width " << s.width << "\n"
      << "channels " << s.channels << "\n"
      << "dtype f32\n"
      << "scale " << scale << "\n"
      << "labels -\n"
      << "id " << id << "\n";
  for (int c = 0; c < s.channels; ++c) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        write_le_f32(out, image.at(0, y, x, c));
      }
    }
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_raw_mask(const std::string& path, const LabelMap& mask,
                    const std::string& id) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::string labels;
  for (int c = 0; c < mask.num_classes; ++c) {
    labels += (c ? "," : "") + std::to_string(c);
  }
  if (labels.empty()) labels = "-";
  out << kRawMagic << "\n"
      << "height " << mask.height << "\n"
      << "width " << mask.width << "\n"
      << "channels 1\n"
      << "dtype u8\n"
      << "scale none\n"
      << "labels " << labels << "\n"
      << "id " << id << "\n";
  out.write(reinterpret_cast<const char*>(mask.labels.data()),
            static_cast<std::streamsize>(mask.labels.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace segmicro
