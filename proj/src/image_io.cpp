#include "cgkqi/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <fmt/format.h>
#include <png.h>

#include "cgkqi/error.hpp"

namespace cgkqi {
namespace {

// Reads the next whitespace-delimited token of a PNM header, skipping
// '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(c);
  }
  return tok;
}

int pnm_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Validation, fmt::format("{}: bad PPM header field '{}'", path.string(), tok));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PixelFrame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  if (pnm_token(in) != "P6") fail(ErrorKind::Validation, path.string() + ": not a binary PPM (P6)");
  const int w = pnm_int(in, path);
  const int h = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (maxval != 255) {
    fail(ErrorKind::Validation, fmt::format("{}: only maxval 255 is supported", path.string()));
  }
  if (w < 1 || h < 1) fail(ErrorKind::Shape, path.string() + ": empty image");
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    fail(ErrorKind::Validation, path.string() + ": truncated pixel data");
  }
  return PixelFrame(w, h, 3, std::move(data));
}

void write_ppm(const PixelFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  if (frame.channels() == 3) {
    out.write(reinterpret_cast<const char*>(frame.data().data()),
              static_cast<std::streamsize>(frame.data().size()));
  } else {
    for (const std::uint8_t v : frame.data()) {
      const char rgb[3] = {static_cast<char>(v), static_cast<char>(v), static_cast<char>(v)};
      out.write(rgb, 3);
    }
  }
}

PixelFrame read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  int width = 0;
  int height = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Validation, path.string() + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.resize(stride * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[r] = data.data() + stride * static_cast<std::size_t>(r);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return PixelFrame(width, height, channels, std::move(data));
}

void write_png(const PixelFrame& frame, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, path.string() + ": PNG encoding failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width()),
               static_cast<png_uint_32>(frame.height()), 8,
               frame.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(frame.width()) * frame.channels();
  for (int r = 0; r < frame.height(); ++r) {
    png_write_row(png, const_cast<png_bytep>(frame.data().data() + stride * r));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

PixelFrame read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  in.close();
  if (png_sig_cmp(sig.data(), 0, sig.size()) == 0) return read_png(path);
  if (sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
  fail(ErrorKind::Validation, path.string() + ": unsupported image format (PPM P6 or PNG only)");
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::Io, fmt::format("{} is not a directory", dir.string()));
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".ppm" || ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

}  // namespace cgkqi
