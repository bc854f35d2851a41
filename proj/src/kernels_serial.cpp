#include "heterloss/kernels.hpp"

#include <atomic>

#include "heterloss/errors.hpp"

namespace heterloss::kernels {

namespace {
#ifdef HETERLOSS_HAVE_OPENMP
std::atomic<Backend> g_backend{Backend::OpenMP};
#else
std::atomic<Backend> g_backend{Backend::Serial};
#endif
}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::OpenMP && !openmp_available()) b = Backend::Serial;
  g_backend.store(b, std::memory_order_relaxed);
}

bool openmp_available() {
#ifdef HETERLOSS_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  if (backend() == Backend::OpenMP) return omp::affine_forward(x, w, b, y);
  serial::affine_forward(x, w, b, y);
}

void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (backend() == Backend::OpenMP) return omp::affine_backward_params(dy, x, dw, db);
  serial::affine_backward_params(dy, x, dw, db);
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (backend() == Backend::OpenMP) return omp::affine_backward_input(dy, w, dx);
  serial::affine_backward_input(dy, w, dx);
}

namespace detail {
void check_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  if (x.cols() != w.cols() || b.size() != w.rows()) throw ShapeError("affine_forward: shape mismatch");
  if (y.rows() != x.rows() || y.cols() != w.rows()) y = Matrix(x.rows(), w.rows());
}
void check_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (dy.rows() != x.rows() || dw.rows() != dy.cols() || dw.cols() != x.cols() || db.size() != dy.cols()) {
    throw ShapeError("affine_backward_params: shape mismatch");
  }
}
void check_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols() != w.rows()) throw ShapeError("affine_backward_input: shape mismatch");
  if (dx.rows() != dy.rows() || dx.cols() != w.cols()) dx = Matrix(dy.rows(), w.cols());
}
}  // namespace detail

namespace serial {

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  detail::check_forward(x, w, b, y);
  const std::size_t in = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r).data();
    double* yr = y.row(r).data();
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double* wo = w.row(o).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc + b[o];
    }
  }
}

void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  detail::check_backward_params(dy, x, dw, db);
  const std::size_t in = x.cols();
  for (std::size_t o = 0; o < dy.cols(); ++o) {
    double* dwo = dw.row(o).data();
    for (std::size_t i = 0; i < in; ++i) dwo[i] = 0.0;
    double bias = 0.0;
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      const double g = dy(r, o);
      if (g == 0.0) continue;
      const double* xr = x.row(r).data();
      for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
      bias += g;
    }
    db[o] = bias;
  }
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  detail::check_backward_input(dy, w, dx);
  const std::size_t in = w.cols();
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double* dxr = dx.row(r).data();
    for (std::size_t i = 0; i < in; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double g = dy(r, o);
      if (g == 0.0) continue;
      const double* wo = w.row(o).data();
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

}  // namespace serial
}  // namespace heterloss::kernels
