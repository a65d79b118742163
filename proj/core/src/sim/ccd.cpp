#include "qcopilot/sim/ccd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qcopilot/error.hpp"

namespace qcp::sim {

namespace {

// Fraction of a unit Gaussian mass falling in each of n pixels centered on the frame.
std::vector<double> pixel_weights(int n, double pixel_size, double sigma) {
  std::vector<double> w(n);
  const double half = 0.5 * n * pixel_size;
  const double scale = 1.0 / (std::sqrt(2.0) * sigma);
  double prev = std::erf((-half) * scale);
  for (int i = 0; i < n; ++i) {
    const double edge = -half + (i + 1) * pixel_size;
    const double next = std::erf(edge * scale);
    w[i] = 0.5 * (next - prev);
    prev = next;
  }
  return w;
}

}  // namespace

void check_geometry(const CcdGeometry& g) {
  if (g.width < 8 || g.height < 8) throw SpecError("CCD frame must be at least 8x8 pixels");
  if (!(g.pixel_size > 0.0)) throw SpecError("CCD pixel size must be positive");
  if (g.border < 1 || 2 * g.border >= std::min(g.width, g.height)) throw SpecError("CCD border does not fit the frame");
  if (!(g.background >= 0.0) || !std::isfinite(g.background)) throw SpecError("CCD background must be >= 0");
}

double expanded_width(const CloudState& cloud, double tof_time, const PhysicalConstants& c) {
  return std::sqrt(cloud.sigma0 * cloud.sigma0 + c.kb * cloud.temperature / c.mass * tof_time * tof_time);
}

CcdImage render_ccd(const CloudState& cloud, double tof_time, const CcdGeometry& g, const PhysicalConstants& c,
                    std::string exposure_tag) {
  if (!std::isfinite(tof_time) || tof_time < 0.0) throw DomainError("render_ccd: tof_time must be >= 0");
  check_geometry(g);
  CcdImage img;
  img.width = g.width;
  img.height = g.height;
  img.exposure_tag = std::move(exposure_tag);
  img.pixels.assign(static_cast<std::size_t>(g.width) * g.height, g.background);

  const double signal = std::max(0.0, cloud.atom_number) * cloud.brightness_per_atom;
  const double sigma = expanded_width(cloud, tof_time, c);
  const double half_extent = 0.5 * std::min(g.width, g.height) * g.pixel_size;
  img.truncated = 4.0 * sigma > half_extent;
  if (!(signal > 0.0) || !(sigma > 0.0)) return img;

  const auto wx = pixel_weights(g.width, g.pixel_size, sigma);
  const auto wy = pixel_weights(g.height, g.pixel_size, sigma);
  for (int y = 0; y < g.height; ++y) {
    double* row = img.pixels.data() + static_cast<std::size_t>(y) * g.width;
    const double ry = signal * wy[y];
    for (int x = 0; x < g.width; ++x) row[x] += ry * wx[x];
  }
  return img;
}

double border_background(const CcdImage& image, int border) {
  if (image.pixels.empty()) return 0.0;
  border = std::clamp(border, 1, std::min(image.width, image.height) / 2);
  std::vector<double> frame;
  frame.reserve(static_cast<std::size_t>(4 * border) * std::max(image.width, image.height));
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const bool edge = x < border || y < border || x >= image.width - border || y >= image.height - border;
      if (edge) frame.push_back(image.at(x, y));
    }
  const std::size_t mid = frame.size() / 2;
  std::nth_element(frame.begin(), frame.begin() + mid, frame.end());
  double median = frame[mid];
  if (frame.size() % 2 == 0) {
    const double lower = *std::max_element(frame.begin(), frame.begin() + mid);
    median = 0.5 * (median + lower);
  }
  return median;
}

double pixel_integral(const CcdImage& image, int border) {
  if (image.pixels.empty()) return 0.0;
  double sum = 0.0;
  for (double p : image.pixels) sum += p;
  return sum - border_background(image, border) * static_cast<double>(image.pixels.size());
}

double cloud_width(const CcdImage& image, double pixel_size, int border) {
  if (image.pixels.empty()) return 0.0;
  const double bg = border_background(image, border);
  double m0 = 0.0, mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const double w = image.at(x, y) - bg;
      m0 += w;
      mx += w * x;
      my += w * y;
      mxx += w * x * x;
      myy += w * y * y;
    }
  if (!(m0 > 0.0)) return 0.0;
  mx /= m0;
  my /= m0;
  // Sheppard correction for the uniform spread inside one pixel.
  const double var = 0.5 * ((mxx / m0 - mx * mx) + (myy / m0 - my * my)) - 1.0 / 12.0;
  return var > 0.0 ? std::sqrt(var) * pixel_size : 0.0;
}

void write_pgm(const CcdImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  double peak = 0.0;
  for (double p : image.pixels) peak = std::max(peak, p);
  const double scale = std::max(1.0, peak / 65535.0);
  std::ostringstream scale_text;
  scale_text.precision(17);
  scale_text << scale;
  out << "P5\n# scale " << scale_text.str() << "\n# tag " << image.exposure_tag << "\n"
      << image.width << ' ' << image.height << "\n65535\n";
  for (double p : image.pixels) {
    const auto v = static_cast<unsigned>(std::clamp(std::round(p / scale), 0.0, 65535.0));
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw IoError("short write to " + path.string());
}

CcdImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "P5") throw SchemaError("not a binary PGM: " + path.string());
  CcdImage img;
  double scale = 1.0;
  std::vector<long> header;
  std::string line;
  while (header.size() < 3 && std::getline(in, line)) {
    if (line.rfind("# scale ", 0) == 0) {
      scale = std::stod(line.substr(8));
    } else if (line.rfind("# tag ", 0) == 0) {
      img.exposure_tag = line.substr(6);
    } else if (!line.empty() && line[0] != '#') {
      std::istringstream fields(line);
      long v;
      while (fields >> v) header.push_back(v);
    }
  }
  if (header.size() != 3 || header[0] <= 0 || header[1] <= 0 || header[2] != 65535)
    throw SchemaError("unsupported PGM header in " + path.string());
  img.width = static_cast<int>(header[0]);
  img.height = static_cast<int>(header[1]);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& p : img.pixels) {
    unsigned char bytes[2];
    if (!in.read(reinterpret_cast<char*>(bytes), 2)) throw SchemaError("truncated PGM " + path.string());
    p = ((bytes[0] << 8) | bytes[1]) * scale;
  }
  return img;
}

}  // namespace qcp::sim
