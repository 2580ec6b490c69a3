#include "llie/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

// jpeglib.h needs size_t and FILE declared first.
#include <jpeglib.h>

namespace llie {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

bool is_png(const fs::path& path) { return lower_extension(path) == ".png"; }

bool is_jpeg(const fs::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".jpg" || ext == ".jpeg";
}

// ---- PNG -----------------------------------------------------------------

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

struct PngDecoded {
  PngHeader header;
  std::vector<unsigned char> pixels;  // RGB, 1 or 2 bytes per sample (host order)
  std::vector<png_bytep> rows;
  bool had_alpha = false;
  bool grayscale = false;
};

/// Returns false with `message` set on any libpng failure. Everything
/// allocated here is POD or owned by `out`, so longjmp is safe.
bool decode_png(std::FILE* file, bool header_only, PngDecoded& out, char* message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    std::snprintf(message, 256, "png_create_read_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(message, 256, "corrupt or unsupported PNG data");
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  PngHeader& h = out.header;
  png_get_IHDR(png, info, &h.width, &h.height, &h.bit_depth, &h.color_type, nullptr, nullptr, nullptr);
  out.grayscale = (h.color_type & PNG_COLOR_MASK_COLOR) == 0;
  out.had_alpha = (h.color_type & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS);
  if (header_only || out.grayscale) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
  }
  if (h.color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    h.bit_depth = 8;
  }
  if (h.bit_depth < 8) png_set_packing(png);
  if (out.had_alpha) png_set_strip_alpha(png);
  if (h.bit_depth == 16) {
    const unsigned probe = 1;
    unsigned char first = 0;
    std::memcpy(&first, &probe, 1);
    if (first == 1) png_set_swap(png);
  }
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * h.height);
  out.rows.resize(h.height);
  for (png_uint_32 y = 0; y < h.height; ++y) out.rows[y] = out.pixels.data() + y * stride;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Tensor<float> load_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  PngDecoded decoded;
  char message[256] = {0};
  if (!decode_png(file.get(), false, decoded, message)) {
    throw Error(ErrorCode::DecodeError, path.string() + ": " + message);
  }
  if (decoded.grayscale) throw Error(ErrorCode::NonRGBError, path.string() + " is grayscale");
  if (decoded.had_alpha) warn(path.string() + ": alpha channel dropped");
  const int h = static_cast<int>(decoded.header.height);
  const int w = static_cast<int>(decoded.header.width);
  Tensor<float> out(1, 3, h, w);
  if (decoded.header.bit_depth == 16) {
    const auto* px = reinterpret_cast<const std::uint16_t*>(decoded.pixels.data());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out(0, c, y, x) = float(px[(std::size_t(y) * w + x) * 3 + c]) / 65535.0f;
  } else {
    const unsigned char* px = decoded.pixels.data();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out(0, c, y, x) = float(px[(std::size_t(y) * w + x) * 3 + c]) / 255.0f;
  }
  return out;
}

// ---- JPEG ----------------------------------------------------------------

struct JpegError {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct JpegDecoded {
  int width = 0;
  int height = 0;
  int components = 0;
  std::vector<unsigned char> pixels;
};

bool decode_jpeg(std::FILE* file, bool header_only, JpegDecoded& out, char* message) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::snprintf(message, 256, "%s", err.message);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  out.width = static_cast<int>(cinfo.image_width);
  out.height = static_cast<int>(cinfo.image_height);
  out.components = cinfo.num_components;
  if (header_only || cinfo.num_components != 3) {
    jpeg_destroy_decompress(&cinfo);
    return true;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const std::size_t stride = std::size_t(cinfo.output_width) * cinfo.output_components;
  out.pixels.resize(stride * cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Tensor<float> load_jpeg(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  JpegDecoded decoded;
  char message[256] = {0};
  if (!decode_jpeg(file.get(), false, decoded, message)) {
    throw Error(ErrorCode::DecodeError, path.string() + ": " + message);
  }
  if (decoded.components != 3) {
    throw Error(ErrorCode::NonRGBError, path.string() + " has " + std::to_string(decoded.components) + " components");
  }
  Tensor<float> out(1, 3, decoded.height, decoded.width);
  for (int y = 0; y < decoded.height; ++y)
    for (int x = 0; x < decoded.width; ++x)
      for (int c = 0; c < 3; ++c)
        out(0, c, y, x) = float(decoded.pixels[(std::size_t(y) * decoded.width + x) * 3 + c]) / 255.0f;
  return out;
}

}  // namespace

bool is_image_file(const fs::path& path) { return is_png(path) || is_jpeg(path); }

Tensor<float> load_image(const fs::path& path) {
  if (is_png(path)) return load_png(path);
  if (is_jpeg(path)) return load_jpeg(path);
  throw Error(ErrorCode::DecodeError, "unsupported image format: " + path.string());
}

ImageSize read_image_size(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  char message[256] = {0};
  if (is_png(path)) {
    PngDecoded decoded;
    if (!decode_png(file.get(), true, decoded, message)) {
      throw Error(ErrorCode::DecodeError, path.string() + ": " + message);
    }
    return {static_cast<int>(decoded.header.height), static_cast<int>(decoded.header.width)};
  }
  if (is_jpeg(path)) {
    JpegDecoded decoded;
    if (!decode_jpeg(file.get(), true, decoded, message)) {
      throw Error(ErrorCode::DecodeError, path.string() + ": " + message);
    }
    return {decoded.height, decoded.width};
  }
  throw Error(ErrorCode::DecodeError, "unsupported image format: " + path.string());
}

void save_png(const fs::path& path, const Tensor<float>& image, int bit_depth) {
  if (image.channels() != 3 || image.batch() < 1) {
    throw Error(ErrorCode::ChannelCountError, "save_png expects N x 3 x H x W, got " + image.shape().str());
  }
  if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::RangeError, "bit depth must be 8 or 16");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const int h = image.height();
  const int w = image.width();
  const int bytes = bit_depth / 8;
  const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<unsigned char> pixels(std::size_t(h) * w * 3 * bytes);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(double(image(0, c, y, x)), 0.0, 1.0);
        const auto code = static_cast<unsigned>(v * max_code + 0.5);
        const std::size_t at = ((std::size_t(y) * w + x) * 3 + c) * bytes;
        if (bytes == 1) {
          pixels[at] = static_cast<unsigned char>(code);
        } else {
          pixels[at] = static_cast<unsigned char>(code >> 8);  // PNG is big-endian
          pixels[at + 1] = static_cast<unsigned char>(code & 0xff);
        }
      }

  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  std::vector<png_bytep> rows(h);
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "failed to write " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + std::size_t(y) * w * 3 * bytes;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace llie
