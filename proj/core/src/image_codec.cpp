#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/image.hpp"

namespace badfusion {

CameraImage::CameraImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error(ErrorKind::InvalidArgument, "negative image size");
  pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

struct PngImageGuard {
  png_image* image;
  ~PngImageGuard() { png_image_free(image); }
};

void check_buffer(const CameraImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorKind::InvalidArgument, "image buffer does not match its dimensions");
  }
}

}  // namespace

CameraImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&png};

  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::CodecFailure, std::string("png: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  CameraImage image(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::CodecFailure, std::string("png: ") + png.message);
  }
  return image;
}

std::vector<std::uint8_t> encode_png(const CameraImage& image) {
  check_buffer(image);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  PngImageGuard guard{&png};

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::CodecFailure, std::string("png: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::CodecFailure, std::string("png: ") + png.message);
  }
  out.resize(size);
  return out;
}

CameraImage read_png(const std::filesystem::path& path) { return decode_png(read_bytes(path)); }

void write_png(const CameraImage& image, const std::filesystem::path& path) {
  write_bytes(path, encode_png(image));
}

// ---------------------------------------------------------------------------
// JPEG
// ---------------------------------------------------------------------------

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

// libjpeg reports errors with longjmp; nothing with a non-trivial destructor
// may be created between setjmp and the last libjpeg call in these functions.
std::vector<std::uint8_t> encode_jpeg(const CameraImage& image, int quality) {
  check_buffer(image);
  if (quality < 1 || quality > 100) {
    throw Error(ErrorKind::InvalidArgument,
                "jpeg quality " + std::to_string(quality) + " outside [1, 100]");
  }

  jpeg_compress_struct cinfo;
  JpegErrorManager jerr;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;

  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = on_jpeg_error;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(ErrorKind::CodecFailure, std::string("jpeg encode: ") + jerr.message);
  }

  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  for (int c = 0; c < cinfo.num_components; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;  // 4:4:4
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  const auto stride = static_cast<std::size_t>(image.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(image.pixels.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

CameraImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = on_jpeg_error;

  CameraImage image;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::CodecFailure, std::string("jpeg decode: ") + jerr.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  image.width = static_cast<int>(cinfo.output_width);
  image.height = static_cast<int>(cinfo.output_height);
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  const auto stride = static_cast<std::size_t>(image.width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPLE* row = image.pixels.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

}  // namespace badfusion
