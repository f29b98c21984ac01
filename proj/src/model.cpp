#include "evoprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evoprune/error.hpp"
#include "evoprune/rng.hpp"

namespace evoprune {

std::size_t Architecture::population_size() const {
  if (widths.size() < 2) return 0;
  return std::accumulate(widths.begin() + 1, widths.end() - 1, std::size_t{0});
}

std::size_t Architecture::population_offset(std::size_t h) const {
  return std::accumulate(widths.begin() + 1, widths.begin() + 1 + static_cast<std::ptrdiff_t>(h),
                         std::size_t{0});
}

void Architecture::validate() const {
  if (widths.size() < 2) throw ContractViolation("architecture needs at least input and output");
  for (auto w : widths) {
    if (w == 0) throw ContractViolation("architecture has a zero-width layer");
  }
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const Architecture& arch) {
  arch.validate();
  ModelParams<T> m;
  m.arch = arch;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    m.layers.push_back(
        {Matrix<T>(arch.widths[l + 1], arch.widths[l]), std::vector<T>(arch.widths[l + 1], T{0})});
  }
  return m;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

template <typename T>
ModelParams<T> init_params(const Architecture& arch, std::uint64_t seed) {
  auto params = ModelParams<T>::zeros(arch);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto gen = rng::make_engine(seed, rng::Stream::init, l);
    const double bound = std::sqrt(6.0 / static_cast<double>(arch.widths[l]));
    for (auto& w : params.layers[l].weight.values()) {
      w = static_cast<T>(rng::uniform(gen, -bound, bound));
    }
  }
  return params;
}

namespace {

template <typename T>
void check_inputs(const ModelParams<T>& params, std::span<const T> p, const Matrix<T>& inputs,
                  std::span<const std::uint8_t> targets) {
  const auto& arch = params.arch;
  if (p.size() != arch.population_size()) {
    throw ContractViolation("population vector has " + std::to_string(p.size()) +
                            " entries, model expects " + std::to_string(arch.population_size()));
  }
  if (inputs.cols() != arch.input_dim()) {
    throw ContractViolation("input width " + std::to_string(inputs.cols()) + " != " +
                            std::to_string(arch.input_dim()));
  }
  if (targets.size() != inputs.rows()) {
    throw ContractViolation("targets length does not match batch rows");
  }
  for (auto t : targets) {
    if (t >= arch.num_classes()) throw ContractViolation("target class out of range");
  }
}

}  // namespace

template <typename T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const std::uint8_t> targets,
                        Matrix<T>* grad_logits) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (grad_logits != nullptr) *grad_logits = Matrix<T>(batch, classes);
  if (batch == 0) return T{0};
  const T inv_batch = T{1} / static_cast<T>(batch);
  T total{0};
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = logits.row(b);
    const T peak = *std::max_element(row.begin(), row.end());
    T sum{0};
    for (auto v : row) sum += std::exp(v - peak);
    total += peak + std::log(sum) - row[targets[b]];
    if (grad_logits != nullptr) {
      auto g = grad_logits->row(b);
      for (std::size_t c = 0; c < classes; ++c) {
        const T prob = std::exp(row[c] - peak) / sum;
        g[c] = (prob - (c == targets[b] ? T{1} : T{0})) * inv_batch;
      }
    }
  }
  return total * inv_batch;
}

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& params, std::span<const T> p,
                        const Matrix<T>& inputs, std::span<const std::uint8_t> targets,
                        Exec exec) {
  check_inputs(params, p, inputs, targets);
  const auto& arch = params.arch;
  const std::size_t batch = inputs.rows();
  ForwardTrace<T> trace;
  trace.pre_gate.reserve(arch.num_hidden());
  trace.gated.reserve(arch.num_hidden());
  trace.activations.reserve(arch.num_hidden());

  const Matrix<T>* x = &inputs;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto& layer = params.layers[l];
    Matrix<T> a(batch, layer.weight.rows());
    kernels::linear_forward(*x, layer.weight, std::span<const T>(layer.bias), a, exec);
    if (l + 1 == arch.num_layers()) {
      trace.logits = std::move(a);
      break;
    }
    const auto gate = p.subspan(arch.population_offset(l), layer.weight.rows());
    Matrix<T> z(batch, a.cols());
    Matrix<T> h(batch, a.cols());
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < a.cols(); ++i) {
        const T zi = gate[i] * a(b, i);
        z(b, i) = zi;
        // NaN must survive the activation so a poisoned batch is reported.
        h(b, i) = zi > T{0} || std::isnan(zi) ? zi : T{0};
      }
    }
    trace.pre_gate.push_back(std::move(a));
    trace.gated.push_back(std::move(z));
    trace.activations.push_back(std::move(h));
    x = &trace.activations.back();
  }

  trace.loss = softmax_cross_entropy(trace.logits, targets, static_cast<Matrix<T>*>(nullptr));
  if (!std::isfinite(trace.loss)) {
    throw NumericError("non-finite loss (" + std::to_string(static_cast<double>(trace.loss)) +
                       ") in forward pass");
  }
  return trace;
}

template <typename T>
Gradients<T> backward(const ForwardTrace<T>& trace, const ModelParams<T>& params,
                      std::span<const T> p, const Matrix<T>& inputs,
                      std::span<const std::uint8_t> targets, Exec exec) {
  check_inputs(params, p, inputs, targets);
  const auto& arch = params.arch;
  if (trace.pre_gate.size() != arch.num_hidden() || trace.logits.rows() != inputs.rows()) {
    throw ContractViolation("trace does not match model/batch");
  }
  const std::size_t batch = inputs.rows();

  Gradients<T> grads{ModelParams<T>::zeros(arch), std::vector<T>(arch.population_size(), T{0})};
  Matrix<T> grad_out;
  softmax_cross_entropy(trace.logits, targets, &grad_out);

  for (std::size_t l = arch.num_layers(); l-- > 0;) {
    const Matrix<T>& x = l == 0 ? inputs : trace.activations[l - 1];
    auto& d_layer = grads.d_params.layers[l];
    kernels::linear_backward_params(grad_out, x, d_layer.weight, std::span<T>(d_layer.bias), exec);
    if (l == 0) break;

    const std::size_t hidden = l - 1;
    const std::size_t width = arch.widths[l];
    Matrix<T> grad_h(batch, width);
    kernels::linear_backward_input(grad_out, params.layers[l].weight, grad_h, exec);

    const auto& a = trace.pre_gate[hidden];
    const auto& z = trace.gated[hidden];
    const std::size_t offset = arch.population_offset(hidden);
    const auto gate = p.subspan(offset, width);
    Matrix<T> grad_a(batch, width);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < width; ++i) {
        const T delta = z(b, i) > T{0} ? grad_h(b, i) : T{0};
        grad_h(b, i) = delta;
        grad_a(b, i) = delta * gate[i];
      }
    }
    for (std::size_t i = 0; i < width; ++i) {
      T acc{0};
      for (std::size_t b = 0; b < batch; ++b) acc += grad_h(b, i) * a(b, i);
      grads.d_p[offset + i] = acc;
    }
    grad_out = std::move(grad_a);
  }
  return grads;
}

template <typename T>
void sgd_step(ModelParams<T>& params, MomentumState<T>& momentum, const ModelParams<T>& grads,
              T lr, T beta) {
  if (params.layers.size() != momentum.layers.size() ||
      params.layers.size() != grads.layers.size()) {
    throw ContractViolation("sgd_step: layer count mismatch");
  }
  auto update = [&](std::span<T> theta, std::span<T> v, std::span<const T> g) {
    if (theta.size() != v.size() || theta.size() != g.size()) {
      throw ContractViolation("sgd_step: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = beta * v[i] + g[i];
      theta[i] = theta[i] - lr * v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight.values(), momentum.layers[l].weight.values(),
           grads.layers[l].weight.values());
    update(params.layers[l].bias, momentum.layers[l].bias, grads.layers[l].bias);
  }
}

template <typename T>
Matrix<T> predict_logits(const ModelParams<T>& params, std::span<const T> p,
                         const Matrix<T>& inputs, Exec exec) {
  const std::vector<std::uint8_t> no_targets(inputs.rows(), 0);
  check_inputs(params, p, inputs, std::span<const std::uint8_t>(no_targets));
  const auto& arch = params.arch;
  Matrix<T> x = inputs;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto& layer = params.layers[l];
    Matrix<T> a(inputs.rows(), layer.weight.rows());
    kernels::linear_forward(x, layer.weight, std::span<const T>(layer.bias), a, exec);
    if (l + 1 < arch.num_layers()) {
      const auto gate = p.subspan(arch.population_offset(l), layer.weight.rows());
      for (std::size_t b = 0; b < a.rows(); ++b) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
          const T zi = gate[i] * a(b, i);
          a(b, i) = zi > T{0} ? zi : T{0};
        }
      }
    }
    x = std::move(a);
  }
  return x;
}

template <typename T>
std::size_t argmax(std::span<const T> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double evaluate(const ModelParams<float>& params, std::span<const float> p,
                const Dataset& dataset, std::size_t chunk) {
  if (dataset.size() == 0) throw ContractViolation("evaluate: empty dataset");
  if (chunk == 0) chunk = dataset.size();
  std::size_t correct = 0;
  for (std::size_t start = 0; start < dataset.size(); start += chunk) {
    const std::size_t n = std::min(chunk, dataset.size() - start);
    Matrix<float> slice(n, dataset.input_dim());
    std::copy_n(dataset.images.data() + start * dataset.input_dim(), n * dataset.input_dim(),
                slice.data());
    const auto logits = predict_logits(params, p, slice);
    for (std::size_t r = 0; r < n; ++r) {
      if (argmax(logits.row(r)) == dataset.labels[start + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

template <typename T>
Matrix<T> convert_matrix(const Matrix<float>& m) {
  Matrix<T> out(m.rows(), m.cols());
  std::transform(m.values().begin(), m.values().end(), out.values().begin(),
                 [](float v) { return static_cast<T>(v); });
  return out;
}

#define EVOPRUNE_INSTANTIATE(T)                                                                   \
  template struct ModelParams<T>;                                                                 \
  template ModelParams<T> init_params<T>(const Architecture&, std::uint64_t);                     \
  template T softmax_cross_entropy<T>(const Matrix<T>&, std::span<const std::uint8_t>,            \
                                      Matrix<T>*);                                                \
  template ForwardTrace<T> forward<T>(const ModelParams<T>&, std::span<const T>,                  \
                                      const Matrix<T>&, std::span<const std::uint8_t>, Exec);     \
  template Gradients<T> backward<T>(const ForwardTrace<T>&, const ModelParams<T>&,                \
                                    std::span<const T>, const Matrix<T>&,                         \
                                    std::span<const std::uint8_t>, Exec);                         \
  template void sgd_step<T>(ModelParams<T>&, MomentumState<T>&, const ModelParams<T>&, T, T);     \
  template Matrix<T> predict_logits<T>(const ModelParams<T>&, std::span<const T>,                 \
                                       const Matrix<T>&, Exec);                                   \
  template std::size_t argmax<T>(std::span<const T>);                                             \
  template Matrix<T> convert_matrix<T>(const Matrix<float>&);

EVOPRUNE_INSTANTIATE(float)
EVOPRUNE_INSTANTIATE(double)

#undef EVOPRUNE_INSTANTIATE

}  // namespace evoprune
