#include "heterloss/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "heterloss/errors.hpp"
#include "heterloss/rng.hpp"
#include "text_util.hpp"

namespace heterloss {

double HeightProfile::length() const {
  return heights.size() < 2 ? 0.0 : spacing * static_cast<double>(heights.size() - 1);
}

double obstruction_depth(const HeightProfile& profile, bool earth_curvature) {
  if (profile.heights.size() < 2) throw InputError("height profile needs at least 2 samples");
  if (!(profile.spacing > 0.0)) throw InputError("height profile spacing must be positive");
  const std::size_t n = profile.heights.size();
  const double total = profile.length();
  const double tx = profile.heights.front() + profile.tx_height_agl;
  const double rx = profile.heights.back() + profile.rx_height_agl;
  double depth = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = profile.spacing * static_cast<double>(i);
    double h = profile.heights[i];
    if (earth_curvature) h += x * (total - x) / (2.0 * kEffectiveEarthFactor * kEarthRadiusM);
    const double los = tx + (rx - tx) * (x / total);
    depth += std::max(0.0, h - los);
  }
  return depth;
}

// --- ASCII grids -------------------------------------------------------------

AsciiGrid::AsciiGrid(std::size_t cols, std::size_t rows, double cell, double fill)
    : ncols(cols), nrows(rows), cellsize(cell), values(cols * rows, fill) {}

bool AsciiGrid::same_geometry(const AsciiGrid& o) const {
  return ncols == o.ncols && nrows == o.nrows && cellsize == o.cellsize && xllcorner == o.xllcorner &&
         yllcorner == o.yllcorner;
}

AsciiGrid read_ascii_grid(std::istream& in, const std::string& source) {
  AsciiGrid g;
  bool have_cols = false, have_rows = false, have_cell = false;
  std::string key;
  // Header: keyword/value pairs until the first numeric token.
  while (in >> key) {
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!lower.empty() && (std::isdigit(static_cast<unsigned char>(lower[0])) || lower[0] == '-' ||
                           lower[0] == '+' || lower[0] == '.')) {
      break;
    }
    double v = 0.0;
    if (!(in >> v)) throw InputError(source + ": bad header value for '" + key + "'");
    if (lower == "ncols") {
      g.ncols = static_cast<std::size_t>(v);
      have_cols = true;
    } else if (lower == "nrows") {
      g.nrows = static_cast<std::size_t>(v);
      have_rows = true;
    } else if (lower == "xllcorner" || lower == "xllcenter") {
      g.xllcorner = v;
    } else if (lower == "yllcorner" || lower == "yllcenter") {
      g.yllcorner = v;
    } else if (lower == "cellsize") {
      g.cellsize = v;
      have_cell = true;
    } else if (lower == "nodata_value") {
      g.nodata = v;
    } else {
      throw InputError(source + ": unknown header key '" + key + "'");
    }
    key.clear();
  }
  if (!have_cols || !have_rows || !have_cell) throw InputError(source + ": header needs ncols, nrows and cellsize");
  if (g.ncols == 0 || g.nrows == 0 || !(g.cellsize > 0.0)) throw InputError(source + ": empty grid");
  g.values.reserve(g.ncols * g.nrows);
  auto push = [&](const std::string& tok) {
    const auto v = text::parse_double(tok);
    if (!v) throw InputError(source + ": bad grid value '" + tok + "'");
    g.values.push_back(*v);
  };
  if (!key.empty()) push(key);
  std::string tok;
  while (g.values.size() < g.ncols * g.nrows && in >> tok) push(tok);
  if (g.values.size() != g.ncols * g.nrows) {
    throw InputError(source + ": expected " + std::to_string(g.ncols * g.nrows) + " values, found " +
                     std::to_string(g.values.size()));
  }
  return g;
}

AsciiGrid read_ascii_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_ascii_grid(in, path.string());
}

void write_ascii_grid(const AsciiGrid& g, std::ostream& out) {
  out << "ncols " << g.ncols << '\n'
      << "nrows " << g.nrows << '\n'
      << "xllcorner " << text::format_double(g.xllcorner) << '\n'
      << "yllcorner " << text::format_double(g.yllcorner) << '\n'
      << "cellsize " << text::format_double(g.cellsize) << '\n'
      << "NODATA_value " << text::format_double(g.nodata) << '\n';
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      if (c) out << ' ';
      out << text::format_double(g.at(c, r));
    }
    out << '\n';
  }
}

void write_ascii_grid(const AsciiGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_ascii_grid(grid, out);
}

void write_pgm(const AsciiGrid& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : g.values) {
    if (g.is_nodata(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P2\n" << g.ncols << ' ' << g.nrows << "\n255\n";
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const double v = g.at(c, r);
      const int level = g.is_nodata(v) ? 0 : 1 + static_cast<int>(std::lround(254.0 * (v - lo) / span));
      out << level << (c + 1 == g.ncols ? '\n' : ' ');
    }
  }
}

std::vector<GridCell> line_cells(GridCell from, GridCell to) {
  std::vector<GridCell> cells;
  long x = from.col, y = from.row;
  const long dx = std::labs(to.col - from.col);
  const long dy = -std::labs(to.row - from.row);
  const long sx = from.col < to.col ? 1 : -1;
  const long sy = from.row < to.row ? 1 : -1;
  long err = dx + dy;
  cells.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
  while (true) {
    cells.push_back({x, y});
    if (x == to.col && y == to.row) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return cells;
}

HeightProfile extract_profile(const AsciiGrid& surface, GridCell from, GridCell to, double tx_height_agl,
                              double rx_height_agl) {
  if (!surface.contains(from.col, from.row) || !surface.contains(to.col, to.row)) {
    throw InputError("profile endpoint outside grid");
  }
  const auto cells = line_cells(from, to);
  HeightProfile p;
  p.tx_height_agl = tx_height_agl;
  p.rx_height_agl = rx_height_agl;
  p.heights.reserve(cells.size());
  for (const auto& c : cells) {
    p.heights.push_back(surface.at(static_cast<std::size_t>(c.col), static_cast<std::size_t>(c.row)));
  }
  const double dcol = static_cast<double>(to.col - from.col);
  const double drow = static_cast<double>(to.row - from.row);
  const double length = std::hypot(dcol, drow) * surface.cellsize;
  p.spacing = cells.size() > 1 ? length / static_cast<double>(cells.size() - 1) : surface.cellsize;
  return p;
}

DemoMap generate_demo_map(std::uint64_t seed, std::size_t cells, double cellsize) {
  Rng rng = Rng(seed).split("demo-map");
  DemoMap map{AsciiGrid(cells, cells, cellsize), AsciiGrid(cells, cells, cellsize)};
  const double extent = static_cast<double>(cells) * cellsize;
  const double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < cells; ++r) {
    for (std::size_t c = 0; c < cells; ++c) {
      const double x = static_cast<double>(c) * cellsize / extent;
      const double y = static_cast<double>(r) * cellsize / extent;
      const double ground = 40.0 + 6.0 * std::sin(2.0 * std::numbers::pi * x + phase1) +
                            4.0 * std::cos(2.0 * std::numbers::pi * 1.5 * y + phase2) + 3.0 * x;
      map.dtm.at(c, r) = ground;
      map.dsm.at(c, r) = ground;
    }
  }

  // City blocks separated by streets; each block holds a few buildings.
  const std::size_t block = 24;
  const std::size_t street = 6;
  const std::size_t centre = cells / 2;
  for (std::size_t by = 0; by + street < cells; by += block) {
    for (std::size_t bx = 0; bx + street < cells; bx += block) {
      const std::size_t x0 = bx + street;
      const std::size_t y0 = by + street;
      const std::size_t x1 = std::min(bx + block, cells);
      const std::size_t y1 = std::min(by + block, cells);
      // keep an open plaza around the transmitter site
      if (x0 <= centre + 6 && x1 + 6 >= centre && y0 <= centre + 6 && y1 + 6 >= centre) continue;
      if (rng.bernoulli(0.15)) continue;  // park
      const int buildings = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
      for (int b = 0; b < buildings; ++b) {
        const auto w = static_cast<std::size_t>(rng.uniform(4.0, 12.0));
        const auto h = static_cast<std::size_t>(rng.uniform(4.0, 12.0));
        const auto ox = x0 + static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(x1 - x0 - 1)));
        const auto oy = y0 + static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(y1 - y0 - 1)));
        const double height = rng.bernoulli(0.1) ? rng.uniform(30.0, 60.0) : rng.uniform(6.0, 25.0);
        for (std::size_t y = oy; y < std::min(oy + h, y1); ++y)
          for (std::size_t x = ox; x < std::min(ox + w, x1); ++x)
            map.dsm.at(x, y) = std::max(map.dsm.at(x, y), map.dtm.at(x, y) + height);
      }
    }
  }
  return map;
}

}  // namespace heterloss
