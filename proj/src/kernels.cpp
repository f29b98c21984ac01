#include "evoprune/kernels.hpp"

#include <cmath>
#include <string>

#include "evoprune/error.hpp"

namespace evoprune::kernels {

namespace {

// Output columns handled per tile of the forward pass; keeps a 784 x 128 slab
// of the transposed weights resident in L2.
constexpr std::size_t kForwardTile = 128;

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(std::string("kernel shape mismatch: ") + what);
}

template <typename T>
void check_forward(const Matrix<T>& in, const Matrix<T>& w, std::span<const T> bias,
                   const Matrix<T>& out) {
  require(in.cols() == w.cols(), "input width != weight fan-in");
  require(bias.size() == w.rows(), "bias length != weight rows");
  require(out.rows() == in.rows() && out.cols() == w.rows(), "output shape");
}

template <typename T>
void check_backward_input(const Matrix<T>& grad_out, const Matrix<T>& w, const Matrix<T>& grad_in) {
  require(grad_out.cols() == w.rows(), "grad_out width != weight rows");
  require(grad_in.rows() == grad_out.rows() && grad_in.cols() == w.cols(), "grad_in shape");
}

template <typename T>
void check_backward_params(const Matrix<T>& grad_out, const Matrix<T>& in, const Matrix<T>& grad_w,
                           std::span<T> grad_b) {
  require(grad_out.rows() == in.rows(), "batch size mismatch");
  require(grad_w.rows() == grad_out.cols() && grad_w.cols() == in.cols(), "grad_w shape");
  require(grad_b.size() == grad_out.cols(), "grad_b length");
}

}  // namespace

namespace reference {

template <typename T>
void linear_forward(const Matrix<T>& in, const Matrix<T>& w, std::span<const T> bias,
                    Matrix<T>& out) {
  check_forward(in, w, bias, out);
  for (std::size_t b = 0; b < in.rows(); ++b) {
    for (std::size_t o = 0; o < w.rows(); ++o) {
      T acc = bias[o];
      for (std::size_t k = 0; k < in.cols(); ++k) acc = std::fma(in(b, k), w(o, k), acc);
      out(b, o) = acc;
    }
  }
}

template <typename T>
void linear_backward_input(const Matrix<T>& grad_out, const Matrix<T>& w, Matrix<T>& grad_in) {
  check_backward_input(grad_out, w, grad_in);
  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    for (std::size_t k = 0; k < w.cols(); ++k) {
      T acc = T{0};
      for (std::size_t o = 0; o < w.rows(); ++o) acc = std::fma(grad_out(b, o), w(o, k), acc);
      grad_in(b, k) = acc;
    }
  }
}

template <typename T>
void linear_backward_params(const Matrix<T>& grad_out, const Matrix<T>& in, Matrix<T>& grad_w,
                            std::span<T> grad_b) {
  check_backward_params(grad_out, in, grad_w, grad_b);
  for (std::size_t o = 0; o < grad_w.rows(); ++o) {
    T bias_acc = T{0};
    for (std::size_t b = 0; b < grad_out.rows(); ++b) bias_acc += grad_out(b, o);
    grad_b[o] = bias_acc;
    for (std::size_t k = 0; k < grad_w.cols(); ++k) {
      T acc = T{0};
      for (std::size_t b = 0; b < grad_out.rows(); ++b) acc = std::fma(grad_out(b, o), in(b, k), acc);
      grad_w(o, k) = acc;
    }
  }
}

}  // namespace reference

template <typename T>
void linear_forward(const Matrix<T>& in, const Matrix<T>& w, std::span<const T> bias,
                    Matrix<T>& out, Exec exec) {
  if (exec == Exec::serial) return reference::linear_forward(in, w, bias, out);
  check_forward(in, w, bias, out);

  const std::size_t batch = in.rows();
  const std::size_t fan_in = w.cols();
  const std::size_t fan_out = w.rows();

  Matrix<T> wt(fan_in, fan_out);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < fan_in; ++k) {
    for (std::size_t o = 0; o < fan_out; ++o) wt(k, o) = w(o, k);
  }

  const std::size_t tiles = (fan_out + kForwardTile - 1) / kForwardTile;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t t = 0; t < tiles; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t lo = t * kForwardTile;
      const std::size_t n = std::min(kForwardTile, fan_out - lo);
      T* __restrict acc = out.data() + b * fan_out + lo;
      const T* x = in.data() + b * fan_in;
      for (std::size_t j = 0; j < n; ++j) acc[j] = bias[lo + j];
      for (std::size_t k = 0; k < fan_in; ++k) {
        const T xk = x[k];
        if (xk == T{0}) continue;
        const T* __restrict wk = wt.data() + k * fan_out + lo;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) acc[j] = std::fma(xk, wk[j], acc[j]);
      }
    }
  }
}

template <typename T>
void linear_backward_input(const Matrix<T>& grad_out, const Matrix<T>& w, Matrix<T>& grad_in,
                           Exec exec) {
  if (exec == Exec::serial) return reference::linear_backward_input(grad_out, w, grad_in);
  check_backward_input(grad_out, w, grad_in);

  const std::size_t fan_in = w.cols();
  const std::size_t fan_out = w.rows();
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    T* __restrict acc = grad_in.data() + b * fan_in;
    for (std::size_t k = 0; k < fan_in; ++k) acc[k] = T{0};
    for (std::size_t o = 0; o < fan_out; ++o) {
      const T g = grad_out(b, o);
      if (g == T{0}) continue;
      const T* __restrict wo = w.data() + o * fan_in;
#pragma omp simd
      for (std::size_t k = 0; k < fan_in; ++k) acc[k] = std::fma(g, wo[k], acc[k]);
    }
  }
}

template <typename T>
void linear_backward_params(const Matrix<T>& grad_out, const Matrix<T>& in, Matrix<T>& grad_w,
                            std::span<T> grad_b, Exec exec) {
  if (exec == Exec::serial) return reference::linear_backward_params(grad_out, in, grad_w, grad_b);
  check_backward_params(grad_out, in, grad_w, grad_b);

  const std::size_t fan_in = in.cols();
#pragma omp parallel for schedule(static)
  for (std::size_t o = 0; o < grad_w.rows(); ++o) {
    T bias_acc = T{0};
    T* __restrict acc = grad_w.data() + o * fan_in;
    for (std::size_t k = 0; k < fan_in; ++k) acc[k] = T{0};
    for (std::size_t b = 0; b < grad_out.rows(); ++b) {
      const T g = grad_out(b, o);
      bias_acc += g;
      if (g == T{0}) continue;
      const T* __restrict x = in.data() + b * fan_in;
#pragma omp simd
      for (std::size_t k = 0; k < fan_in; ++k) acc[k] = std::fma(g, x[k], acc[k]);
    }
    grad_b[o] = bias_acc;
  }
}

#define EVOPRUNE_INSTANTIATE(T)                                                                 \
  template void linear_forward<T>(const Matrix<T>&, const Matrix<T>&, std::span<const T>,       \
                                  Matrix<T>&, Exec);                                            \
  template void linear_backward_input<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&, Exec); \
  template void linear_backward_params<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&,       \
                                          std::span<T>, Exec);                                  \
  template void reference::linear_forward<T>(const Matrix<T>&, const Matrix<T>&,                \
                                             std::span<const T>, Matrix<T>&);                   \
  template void reference::linear_backward_input<T>(const Matrix<T>&, const Matrix<T>&,         \
                                                    Matrix<T>&);                                \
  template void reference::linear_backward_params<T>(const Matrix<T>&, const Matrix<T>&,        \
                                                     Matrix<T>&, std::span<T>);

EVOPRUNE_INSTANTIATE(float)
EVOPRUNE_INSTANTIATE(double)

#undef EVOPRUNE_INSTANTIATE

}  // namespace evoprune::kernels
