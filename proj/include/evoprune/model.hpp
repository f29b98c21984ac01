#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evoprune/data.hpp"
#include "evoprune/kernels.hpp"
#include "evoprune/tensor.hpp"

namespace evoprune {

using kernels::Exec;

// Layer widths from input to output, e.g. {784, 512, 256, 10}. Every layer
// except the last is a gated hidden layer; its neurons are the populations.
struct Architecture {
  std::vector<std::size_t> widths;

  static Architecture mnist() { return {{784, 512, 256, 10}}; }

  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t num_hidden() const { return widths.size() - 2; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t num_classes() const { return widths.back(); }
  // Total number of gated neurons (length of the population vector).
  std::size_t population_size() const;
  // Offset of hidden layer `h` inside the population vector.
  std::size_t population_offset(std::size_t h) const;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

template <typename T>
struct Layer {
  Matrix<T> weight;  // fan_out x fan_in
  std::vector<T> bias;

  bool operator==(const Layer&) const = default;
};

// Also used for momentum buffers and weight gradients, which share its shapes.
template <typename T>
struct ModelParams {
  Architecture arch;
  std::vector<Layer<T>> layers;

  static ModelParams zeros(const Architecture& arch);
  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

template <typename T>
using MomentumState = ModelParams<T>;

template <typename T>
struct ForwardTrace {
  std::vector<Matrix<T>> pre_gate;     // a = W x + b, per hidden layer
  std::vector<Matrix<T>> gated;        // z = p * a
  std::vector<Matrix<T>> activations;  // h = max(0, z)
  Matrix<T> logits;
  T loss{};                            // mean softmax cross-entropy
};

template <typename T>
struct Gradients {
  ModelParams<T> d_params;
  std::vector<T> d_p;  // dL/dp, layer-1 neurons first
};

// He-uniform: W ~ U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), std sqrt(2 / fan_in);
// biases zero. Layer l draws from its own engine, so layers are independent of
// each other's sizes.
template <typename T>
ModelParams<T> init_params(const Architecture& arch, std::uint64_t seed);

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& params, std::span<const T> p,
                        const Matrix<T>& inputs, std::span<const std::uint8_t> targets,
                        Exec exec = Exec::parallel);

// Exact gradients of the batch-mean loss. At z = 0 the rectifier derivative is
// taken as 0, so a silenced neuron (p_i = 0) reports dL/dp_i = 0.
template <typename T>
Gradients<T> backward(const ForwardTrace<T>& trace, const ModelParams<T>& params,
                      std::span<const T> p, const Matrix<T>& inputs,
                      std::span<const std::uint8_t> targets, Exec exec = Exec::parallel);

// Classical momentum: v <- beta * v + g; theta <- theta - lr * v.
template <typename T>
void sgd_step(ModelParams<T>& params, MomentumState<T>& momentum, const ModelParams<T>& grads,
              T lr, T beta);

// Logits only, no loss; used for evaluation.
template <typename T>
Matrix<T> predict_logits(const ModelParams<T>& params, std::span<const T> p,
                         const Matrix<T>& inputs, Exec exec = Exec::parallel);

// Index of the largest logit, lowest index on ties.
template <typename T>
std::size_t argmax(std::span<const T> row);

// Fraction of samples whose argmax logit matches the label.
double evaluate(const ModelParams<float>& params, std::span<const float> p,
                const Dataset& dataset, std::size_t chunk = 1000);

// Mean cross-entropy and its gradient w.r.t. the logits (already divided by
// the batch size).
template <typename T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const std::uint8_t> targets,
                        Matrix<T>* grad_logits);

template <typename T>
Matrix<T> convert_matrix(const Matrix<float>& m);

}  // namespace evoprune
