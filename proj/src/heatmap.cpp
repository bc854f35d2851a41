#include "heterloss/heatmap.hpp"

#include <cmath>
#include <cstdint>

#include "heterloss/errors.hpp"
#include "heterloss/kernels.hpp"
#include "heterloss/metrics.hpp"

namespace heterloss {

void HeatmapJob::validate() const {
  if (surface.values.empty()) throw InputError("heatmap: empty surface grid");
  if (!surface.contains(tx.col, tx.row)) throw InputError("heatmap: transmitter outside grid");
  if (ground && !ground->same_geometry(surface)) throw InputError("heatmap: ground and surface grids differ");
  if (!(frequency_mhz > 0.0)) throw InputError("heatmap: frequency must be positive");
  if (!(tx_height_agl >= 0.0 && rx_height_agl >= 0.0)) throw InputError("heatmap: antenna heights must be >= 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InputError("heatmap: confidence must be in (0, 1)");
  if (surface.is_nodata(surface.at(static_cast<std::size_t>(tx.col), static_cast<std::size_t>(tx.row)))) {
    throw InputError("heatmap: transmitter on a nodata cell");
  }
}

bool is_indoor(const HeatmapJob& job, GridCell cell) {
  if (!job.ground) return false;
  const auto c = static_cast<std::size_t>(cell.col);
  const auto r = static_cast<std::size_t>(cell.row);
  const double top = job.surface.at(c, r);
  const double base = job.ground->at(c, r);
  if (job.surface.is_nodata(top) || job.ground->is_nodata(base)) return false;
  return top - base > job.building_threshold_m;
}

std::optional<std::array<double, 3>> pixel_features(const HeatmapJob& job, GridCell cell) {
  if (cell == job.tx) return std::nullopt;
  const auto c = static_cast<std::size_t>(cell.col);
  const auto r = static_cast<std::size_t>(cell.row);
  if (job.surface.is_nodata(job.surface.at(c, r))) return std::nullopt;
  if (is_indoor(job, cell)) return std::nullopt;
  const auto profile = extract_profile(job.surface, job.tx, cell, job.tx_height_agl, job.rx_height_agl);
  for (double h : profile.heights)
    if (job.surface.is_nodata(h)) return std::nullopt;
  const double distance = std::hypot(static_cast<double>(cell.col - job.tx.col),
                                     static_cast<double>(cell.row - job.tx.row)) *
                          job.surface.cellsize;
  return std::array<double, 3>{job.frequency_mhz, distance, obstruction_depth(profile, job.earth_curvature)};
}

HeatmapResult render_heatmap(const HeatmapJob& job, const PathLossModel& model) {
  job.validate();
  const auto& s = job.surface;
  HeatmapResult out;
  for (AsciiGrid* g : {&out.width, &out.mean, &out.sd, &out.obstruction}) {
    *g = AsciiGrid(s.ncols, s.nrows, s.cellsize, s.nodata);
    g->xllcorner = s.xllcorner;
    g->yllcorner = s.yllcorner;
    g->nodata = s.nodata;
    std::fill(g->values.begin(), g->values.end(), s.nodata);
  }

  const std::size_t n = s.ncols * s.nrows;
  std::vector<std::optional<std::array<double, 3>>> features(n);
  const auto total = static_cast<std::int64_t>(n);
  [[maybe_unused]] const bool parallel = kernels::backend() == kernels::Backend::OpenMP;
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (std::int64_t i = 0; i < total; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const GridCell cell{static_cast<long>(idx % s.ncols), static_cast<long>(idx / s.ncols)};
    features[idx] = pixel_features(job, cell);
  }

  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    if (features[i]) index.push_back(i);
  out.predicted = index.size();
  out.masked = n - index.size();
  if (index.empty()) return out;

  Matrix raw(index.size(), 3);
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto& f = *features[index[k]];
    raw(k, 0) = f[0];
    raw(k, 1) = f[1];
    raw(k, 2) = f[2];
  }
  const auto preds = predict_links(model, raw);
  const double z = z_critical(job.confidence);
  for (std::size_t k = 0; k < index.size(); ++k) {
    const std::size_t i = index[k];
    out.width.values[i] = 2.0 * z * preds[k].sd;
    out.mean.values[i] = preds[k].mean;
    out.sd.values[i] = preds[k].sd;
    out.obstruction.values[i] = raw(k, 2);
  }
  return out;
}

}  // namespace heterloss
