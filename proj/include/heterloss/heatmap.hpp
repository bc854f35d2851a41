#pragma once

#include <array>
#include <optional>

#include "heterloss/model_io.hpp"
#include "heterloss/terrain.hpp"

namespace heterloss {

/// Coverage job: one transmitter over a height map, one receiver per pixel.
struct HeatmapJob {
  AsciiGrid surface;               // terrain + clutter heights (DSM)
  std::optional<AsciiGrid> ground; // bare terrain (DTM); enables the building mask
  GridCell tx;
  double tx_height_agl = 20.0;
  double rx_height_agl = 1.5;
  double frequency_mhz = 3500.0;
  double confidence = 0.95;
  /// A pixel is indoors when surface - ground exceeds this (m).
  double building_threshold_m = 2.0;
  bool earth_curvature = true;

  void validate() const;
};

struct HeatmapResult {
  AsciiGrid width;  // upper - lower interval bound, dB
  AsciiGrid mean;   // dB
  AsciiGrid sd;     // dB
  AsciiGrid obstruction;  // m
  std::size_t predicted = 0;
  std::size_t masked = 0;
};

/// True when the pixel is inside a building (needs a ground grid).
bool is_indoor(const HeatmapJob& job, GridCell cell);

/// (frequency MHz, distance m, obstruction m) for a receiver at `cell`, or
/// nullopt for masked pixels, nodata pixels and the transmitter pixel itself.
/// Reads only the cells on the transmitter-receiver line (plus the ground value at `cell`).
std::optional<std::array<double, 3>> pixel_features(const HeatmapJob& job, GridCell cell);

HeatmapResult render_heatmap(const HeatmapJob& job, const PathLossModel& model);

}  // namespace heterloss
