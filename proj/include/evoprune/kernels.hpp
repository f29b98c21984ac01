#pragma once

// Dense-layer kernels in two flavours: a naive serial reference and an
// OpenMP path that tiles and vectorizes. Both accumulate every output element
// in the same order with std::fma, so they agree value-for-value regardless of
// thread count. The parallel path skips zero multiplicands (ReLU outputs and
// blank MNIST pixels), which can only change the sign of an exact zero.

#include <span>

#include "evoprune/tensor.hpp"

namespace evoprune::kernels {

enum class Exec { parallel, serial };

// out[b][o] = bias[o] + sum_k in[b][k] * w[o][k], k ascending.
template <typename T>
void linear_forward(const Matrix<T>& in, const Matrix<T>& w, std::span<const T> bias,
                    Matrix<T>& out, Exec exec = Exec::parallel);

// grad_in[b][k] = sum_o grad_out[b][o] * w[o][k], o ascending.
template <typename T>
void linear_backward_input(const Matrix<T>& grad_out, const Matrix<T>& w, Matrix<T>& grad_in,
                           Exec exec = Exec::parallel);

// grad_w[o][k] = sum_b grad_out[b][o] * in[b][k] and grad_b[o] = sum_b grad_out[b][o],
// b ascending.
template <typename T>
void linear_backward_params(const Matrix<T>& grad_out, const Matrix<T>& in, Matrix<T>& grad_w,
                            std::span<T> grad_b, Exec exec = Exec::parallel);

namespace reference {

template <typename T>
void linear_forward(const Matrix<T>& in, const Matrix<T>& w, std::span<const T> bias,
                    Matrix<T>& out);

template <typename T>
void linear_backward_input(const Matrix<T>& grad_out, const Matrix<T>& w, Matrix<T>& grad_in);

template <typename T>
void linear_backward_params(const Matrix<T>& grad_out, const Matrix<T>& in, Matrix<T>& grad_w,
                            std::span<T> grad_b);

}  // namespace reference

}  // namespace evoprune::kernels
