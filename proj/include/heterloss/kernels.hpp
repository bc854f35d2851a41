#pragma once

// Dense-layer kernels. Every kernel has a serial reference implementation and
// an OpenMP one; both sum in the same order, so their results are bit-identical
// and training stays deterministic whichever backend is active.

#include <span>

#include "heterloss/matrix.hpp"

namespace heterloss::kernels {

enum class Backend { Serial, OpenMP };

/// Backend used by the dispatching functions below. Defaults to OpenMP when
/// the library was built with it.
Backend backend();
void set_backend(Backend b);
bool openmp_available();

/// RAII backend override, mostly for tests and benchmarks.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

// y = x * w^T + b      x: B x in, w: out x in, y: B x out
void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
// dw = dy^T * x, db = column sums of dy
void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
// dx = dy * w
void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);

namespace serial {
void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
}  // namespace serial

namespace omp {
void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
}  // namespace omp

}  // namespace heterloss::kernels
