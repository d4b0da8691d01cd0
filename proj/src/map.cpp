#include "novact/explorer.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace novact {

namespace {

constexpr std::array<Rgb, 10> kPalette{{{31, 119, 180},
                                        {255, 127, 14},
                                        {44, 160, 44},
                                        {214, 39, 40},
                                        {188, 189, 34},
                                        {23, 190, 207},
                                        {140, 86, 75},
                                        {127, 127, 127},
                                        {0, 0, 160},
                                        {0, 128, 128}}};

std::uint8_t blend(std::uint8_t base, double alpha) {
  const double v = 255.0 * (1.0 - alpha) + static_cast<double>(base) * alpha;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

}  // namespace

Rgb pattern_color(std::size_t k) { return kPalette[k % kPalette.size()]; }

double similarity(double min_dtw, double learned_threshold) {
  const double scale = 4.0 * learned_threshold;
  if (!(scale > 0.0)) return min_dtw <= 0.0 ? 1.0 : 0.0;
  return 1.0 - std::clamp(min_dtw / scale, 0.0, 1.0);
}

Rgb MapImage::pixel(int x, int y) const {
  const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x));
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

MapImage render_map(const SweepResult& result, const std::vector<std::string>& labels) {
  const int res = result.grid.resolution;
  MapImage image;
  image.width = res;
  image.height = res;
  image.rgb.assign(3 * result.grid.cells(), 0);
  for (std::size_t k = 0; k < labels.size(); ++k) image.legend.push_back({labels[k], pattern_color(k)});
  image.legend.push_back({std::string(to_string(PatternClass::Fluctuating)), kFluctuatingColor});
  image.legend.push_back({std::string(to_string(PatternClass::NonMoving)), kNonMovingColor});

  for (const auto& cell : result.cells) {
    Rgb color;
    switch (cell.label.cls) {
      case PatternClass::Fluctuating: color = kFluctuatingColor; break;
      case PatternClass::NonMoving: color = kNonMovingColor; break;
      default: {
        const auto it = std::find(labels.begin(), labels.end(), *cell.label.nearest);
        require(it != labels.end(), ErrorKind::InvalidArgument,
                "no legend entry for pattern '" + *cell.label.nearest + "'");
        const Rgb base = pattern_color(static_cast<std::size_t>(it - labels.begin()));
        const double alpha = 0.25 + 0.75 * similarity(*cell.label.min_dtw, result.learned_threshold);
        color = {blend(base.r, alpha), blend(base.g, alpha), blend(base.b, alpha)};
      }
    }
    const int x = cell.ix;
    const int y = res - 1 - cell.iy;  // PB2 grows upward
    const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(res) +
                        static_cast<std::size_t>(x));
    image.rgb[i] = color.r;
    image.rgb[i + 1] = color.g;
    image.rgb[i + 2] = color.b;
  }
  return image;
}

void write_png(const MapImage& image, const std::filesystem::path& path) {
  std::string raw;
  const auto stride = static_cast<std::size_t>(image.width) * 3;
  raw.reserve((stride + 1) * static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(image.rgb.data()) + y * stride, stride);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                           reinterpret_cast<const Bytef*>(raw.data()),
                           static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION);
  require(rc == Z_OK, ErrorKind::IOError, "zlib compression failed");
  packed.resize(packed_size);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string header;
  put_u32(header, static_cast<std::uint32_t>(image.width));
  put_u32(header, static_cast<std::uint32_t>(image.height));
  header += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB, no interlace
  put_chunk(png, "IHDR", header);
  put_chunk(png, "IDAT", packed);
  put_chunk(png, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + path.string());
  out.write(png.data(), static_cast<std::streamsize>(png.size()));
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + path.string());
}

void write_ppm(const MapImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + path.string());
}

nlohmann::ordered_json legend_json(const MapImage& image) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : image.legend) {
    entries.push_back({{"name", e.name},
                       {"color", hex(e.color)},
                       {"rgb", {e.color.r, e.color.g, e.color.b}}});
  }
  return {{"width", image.width},
          {"height", image.height},
          {"x_axis", "PB1"},
          {"y_axis", "PB2 (top = +1)"},
          {"legend", std::move(entries)}};
}

}  // namespace novact
