#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace heterloss {

/// Evenly spaced terrain+clutter heights (m above sea level) from transmitter
/// to receiver. Antenna heights are above the first and last sample.
struct HeightProfile {
  std::vector<double> heights;
  double spacing = 1.0;
  double tx_height_agl = 0.0;
  double rx_height_agl = 0.0;

  [[nodiscard]] double length() const;
};

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kEffectiveEarthFactor = 4.0 / 3.0;

/// Total obstruction depth (m): the summed penetration of the profile above the
/// straight transmitter-receiver line, one term per profile sample. With
/// `earth_curvature` each sample is first raised by the effective-Earth bulge
/// x(D - x) / (2 k R).
double obstruction_depth(const HeightProfile& profile, bool earth_curvature = true);

/// Planar raster in ESRI ASCII layout: row 0 is the northern edge.
struct AsciiGrid {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> values;  // row-major, nrows * ncols

  AsciiGrid() = default;
  AsciiGrid(std::size_t cols, std::size_t rows, double cell, double fill = 0.0);

  double& at(std::size_t col, std::size_t row) { return values[row * ncols + col]; }
  [[nodiscard]] double at(std::size_t col, std::size_t row) const { return values[row * ncols + col]; }
  [[nodiscard]] bool contains(long col, long row) const {
    return col >= 0 && row >= 0 && static_cast<std::size_t>(col) < ncols && static_cast<std::size_t>(row) < nrows;
  }
  [[nodiscard]] bool is_nodata(double v) const { return v == nodata; }
  [[nodiscard]] bool same_geometry(const AsciiGrid& other) const;
};

AsciiGrid read_ascii_grid(const std::filesystem::path& path);
AsciiGrid read_ascii_grid(std::istream& in, const std::string& source = "<stream>");
void write_ascii_grid(const AsciiGrid& grid, const std::filesystem::path& path);
void write_ascii_grid(const AsciiGrid& grid, std::ostream& out);

/// Greyscale PGM (P2) preview; nodata is black, the valid range is stretched to 1..255.
void write_pgm(const AsciiGrid& grid, const std::filesystem::path& path);

struct GridCell {
  long col = 0;
  long row = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Cells crossed by the straight line between two cells (Bresenham), inclusive.
std::vector<GridCell> line_cells(GridCell from, GridCell to);

/// Profile along line_cells(from, to); spacing is the Euclidean length divided
/// evenly between samples. Reads only the cells on that line.
HeightProfile extract_profile(const AsciiGrid& surface, GridCell from, GridCell to, double tx_height_agl,
                              double rx_height_agl);

/// Procedural urban tile: gently rolling terrain (dtm) and the same terrain with
/// rectangular buildings on a street grid (dsm).
struct DemoMap {
  AsciiGrid dtm;
  AsciiGrid dsm;
};
DemoMap generate_demo_map(std::uint64_t seed = 7, std::size_t cells = 200, double cellsize = 5.0);

}  // namespace heterloss
