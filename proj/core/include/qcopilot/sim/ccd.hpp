#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qcopilot/sim/response.hpp"

namespace qcp::sim {

struct CcdGeometry {
  int width = 128;
  int height = 128;
  double pixel_size = 60e-6;  // object-plane pixel pitch [m]
  int border = 4;             // frame width used for the background estimate
  double background = 5.0;    // uniform offset per pixel [counts]
};

struct CcdImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major, height * width
  std::string exposure_tag;
  // Set when +-4 sigma of the cloud does not fit inside the frame.
  bool truncated = false;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Throws SpecError on a degenerate geometry.
void check_geometry(const CcdGeometry& g);

// rms cloud radius after free expansion: sigma^2 = sigma0^2 + (kB T / m) t^2.
double expanded_width(const CloudState& cloud, double tof_time, const PhysicalConstants& c);

// Renders an isotropic Gaussian cloud centered on the frame. Each pixel integrates the exact
// Gaussian over its area, so the frame sum is brightness_per_atom * atom_number plus background
// (minus whatever falls outside the frame). Throws DomainError on negative or non-finite tof_time.
CcdImage render_ccd(const CloudState& cloud, double tof_time, const CcdGeometry& geometry,
                    const PhysicalConstants& constants, std::string exposure_tag = {});

// Median of the border frame.
double border_background(const CcdImage& image, int border = 4);
// Sum of all pixels minus border median times pixel count.
double pixel_integral(const CcdImage& image, int border = 4);
// rms radius [m] from background-subtracted second moments, pixel-binning corrected.
// Returns 0 for an empty image.
double cloud_width(const CcdImage& image, double pixel_size, int border = 4);

// 16-bit binary PGM. Counts are stored as round(pixel / scale) with the scale in a header comment,
// where scale = max(1, max pixel / 65535).
void write_pgm(const CcdImage& image, const std::filesystem::path& path);
// Throws IoError or SchemaError on unreadable input.
CcdImage read_pgm(const std::filesystem::path& path);

}  // namespace qcp::sim
