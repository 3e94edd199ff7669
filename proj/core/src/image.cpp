#include "retav/image.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstring>

#include "io_util.hpp"
#include "retav/error.hpp"

namespace retav {

namespace {

// ---------------------------------------------------------------------------
// PPM (P5 gray / P6 color, maxval <= 255)

class PpmTokenizer {
 public:
  PpmTokenizer(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

  // Next whitespace-delimited token, skipping '#' comments.
  std::string next() {
    for (;;) {
      while (pos_ < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
      if (pos_ < buf_.size() && buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::size_t start = pos_;
    while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    if (start == pos_) throw Error("ppm: truncated header");
    return buf_.substr(start, pos_ - start);
  }

  std::size_t data_offset() const { return pos_ + 1; }  // single whitespace after maxval

 private:
  const std::string& buf_;
  std::size_t pos_;
};

int parse_ppm_int(const std::string& tok) {
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c))) throw Error("ppm: bad header token '" + tok + "'");
  return std::stoi(tok);
}

RasterImage decode_ppm(const std::string& buf) {
  const int channels = buf[1] == '6' ? 3 : 1;
  PpmTokenizer tok(buf, 2);
  const int width = parse_ppm_int(tok.next());
  const int height = parse_ppm_int(tok.next());
  const int maxval = parse_ppm_int(tok.next());
  if (width < 1 || height < 1) throw Error("ppm: zero dimensions");
  if (maxval <= 0 || maxval > 255) throw Error("ppm: unsupported maxval " + std::to_string(maxval));
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  const std::size_t off = tok.data_offset();
  if (off + need > buf.size()) throw Error("ppm: truncated pixel data");
  RasterImage img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(buf.begin() + off, buf.begin() + off + need);
  return img;
}

void encode_ppm(const RasterImage& img, std::ostream& out) {
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
}

// ---------------------------------------------------------------------------
// PNG via libpng, reading/writing through memory buffers

struct PngReadCtx {
  const std::string* buf;
  std::size_t pos;
};

extern "C" void retav_png_read(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->buf->size()) png_error(png, "unexpected end of stream");
  std::memcpy(out, ctx->buf->data() + ctx->pos, n);
  ctx->pos += n;
}

extern "C" void retav_png_write(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

extern "C" void retav_png_flush(png_structp) {}

RasterImage decode_png(const std::string& buf, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png: init failed");
  }
  std::vector<png_bytep> row_ptrs;
  RasterImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: undecodable file: " + path);
  }
  PngReadCtx ctx{&buf, 0};
  png_set_read_fn(png, &ctx, retav_png_read);
  png_read_info(png, info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int out_channels = png_get_channels(png, info);
  if (out_channels != 1 && out_channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: unsupported channel count " + std::to_string(out_channels));
  }
  if (width == 0 || height == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: zero dimensions");
  }

  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  img.channels = out_channels;
  img.data.resize(static_cast<std::size_t>(width) * height * out_channels);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y)
    row_ptrs[y] = img.data.data() + static_cast<std::size_t>(y) * width * out_channels;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void encode_png(const RasterImage& img, std::string& out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: init failed");
  }
  std::vector<png_const_bytep> row_ptrs(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encode failed");
  }
  png_set_write_fn(png, &out, retav_png_write, retav_png_flush);
  const int color = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    row_ptrs[y] = img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
  png_write_image(png, const_cast<png_bytepp>(row_ptrs.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

bool has_png_signature(const std::string& buf) {
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return buf.size() >= 8 && std::memcmp(buf.data(), sig, 8) == 0;
}

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

void validate_raster(const RasterImage& img) {
  if (img.width < 1 || img.height < 1) throw std::invalid_argument("raster: zero dimensions");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("raster: channels must be 1 or 3");
  if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw std::invalid_argument("raster: data length does not match dimensions");
}

}  // namespace

RasterImage load_image(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  if (has_png_signature(buf)) return decode_png(buf, path);
  if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '6')) return decode_ppm(buf);
  throw Error("unrecognized image format: " + path);
}

void save_image(const RasterImage& img, const std::string& path) {
  validate_raster(img);
  const std::string ext = lower_ext(path);
  detail::AtomicWriter w(path);
  if (ext == ".png") {
    std::string out;
    encode_png(img, out);
    w.stream().write(out.data(), static_cast<std::streamsize>(out.size()));
  } else if (ext == ".ppm") {
    if (img.channels != 3) throw Error("save_image: .ppm requires a 3-channel image");
    encode_ppm(img, w.stream());
  } else if (ext == ".pgm") {
    if (img.channels != 1) throw Error("save_image: .pgm requires a 1-channel image");
    encode_ppm(img, w.stream());
  } else {
    throw Error("save_image: unsupported extension '" + ext + "' (use .png/.ppm/.pgm)");
  }
  w.commit();
}

ScalarField extract_field(const RasterImage& img, int channel) {
  validate_raster(img);
  if (channel < 0 || channel >= img.channels)
    throw std::invalid_argument("extract_field: channel " + std::to_string(channel) +
                                " out of range for " + std::to_string(img.channels) + " channels");
  ScalarField f(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i)
    f.values[i] = static_cast<double>(img.data[i * img.channels + channel]);
  return f;
}

ScalarField extract_field_luminance(const RasterImage& img) {
  validate_raster(img);
  if (img.channels == 1) return extract_field(img, 0);
  ScalarField f(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = img.data[i * 3], g = img.data[i * 3 + 1], b = img.data[i * 3 + 2];
    f.values[i] = static_cast<double>(299 * r + 587 * g + 114 * b) / 1000.0;
  }
  return f;
}

RasterImage label_mask_to_image(const LabelMask& mask) {
  RasterImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.channels = 3;
  img.data.assign(static_cast<std::size_t>(mask.width) * mask.height * 3, 0);
  const std::size_t n = static_cast<std::size_t>(mask.width) * mask.height;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.classes[i] == 1) img.data[i * 3] = 255;       // artery: red
    else if (mask.classes[i] == 2) img.data[i * 3 + 2] = 255;  // vein: blue
  }
  return img;
}

LabelMask image_to_label_mask(const RasterImage& img) {
  validate_raster(img);
  LabelMask mask(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    int r, g, b;
    if (img.channels == 1) {
      r = g = b = img.data[i];
    } else {
      r = img.data[i * 3];
      g = img.data[i * 3 + 1];
      b = img.data[i * 3 + 2];
    }
    if (r == 0 && g == 0 && b == 0) {
      mask.classes[i] = 0;
    } else if (r == 255 && g == 0 && b == 0) {
      mask.classes[i] = 1;
    } else if (r == 0 && g == 0 && b == 255) {
      mask.classes[i] = 2;
    } else {
      const int x = static_cast<int>(i) % img.width;
      const int y = static_cast<int>(i) / img.width;
      throw Error("label mask: unrecognized color (" + std::to_string(r) + "," +
                  std::to_string(g) + "," + std::to_string(b) + ") at pixel (" +
                  std::to_string(x) + "," + std::to_string(y) + ")");
    }
  }
  return mask;
}

LabelMask load_label_mask(const std::string& path) { return image_to_label_mask(load_image(path)); }

void save_label_mask(const LabelMask& mask, const std::string& path) {
  save_image(label_mask_to_image(mask), path);
}

}  // namespace retav
