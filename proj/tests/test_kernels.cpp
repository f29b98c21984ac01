#include <gtest/gtest.h>

#include <cmath>

#include "evoprune/error.hpp"
#include "evoprune/kernels.hpp"
#include "evoprune/rng.hpp"

namespace evoprune::kernels {
namespace {

template <typename T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double zero_rate = 0.0) {
  Matrix<T> m(r, c);
  for (auto& v : m.values()) {
    v = rng::uniform01(gen) < zero_rate ? T{0} : static_cast<T>(rng::uniform(gen, -1.0, 1.0));
  }
  return m;
}

// Same value, ignoring the sign of zero.
template <typename T>
void expect_same_values(const Matrix<T>& a, const Matrix<T>& b) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a.values()[i] == b.values()[i]) << "entry " << i << ": " << a.values()[i]
                                                << " vs " << b.values()[i];
  }
}

struct Shape {
  std::size_t batch, fan_in, fan_out;
};

class KernelAgreement : public ::testing::TestWithParam<Shape> {};

TEST_P(KernelAgreement, ParallelEqualsSerialReferenceFloat) {
  const auto [batch, fan_in, fan_out] = GetParam();
  auto gen = rng::make_engine(11, rng::Stream::synthetic, batch * 7 + fan_in);
  const auto x = random_matrix<float>(batch, fan_in, gen, 0.4);
  const auto w = random_matrix<float>(fan_out, fan_in, gen);
  const auto g = random_matrix<float>(batch, fan_out, gen, 0.3);
  std::vector<float> bias(fan_out);
  for (auto& b : bias) b = static_cast<float>(rng::uniform(gen, -1, 1));

  Matrix<float> out_p(batch, fan_out), out_s(batch, fan_out), out_r(batch, fan_out);
  linear_forward(x, w, std::span<const float>(bias), out_p, Exec::parallel);
  linear_forward(x, w, std::span<const float>(bias), out_s, Exec::serial);
  reference::linear_forward(x, w, std::span<const float>(bias), out_r);
  expect_same_values(out_p, out_r);
  expect_same_values(out_s, out_r);

  Matrix<float> gi_p(batch, fan_in), gi_r(batch, fan_in);
  linear_backward_input(g, w, gi_p, Exec::parallel);
  reference::linear_backward_input(g, w, gi_r);
  expect_same_values(gi_p, gi_r);

  Matrix<float> gw_p(fan_out, fan_in), gw_r(fan_out, fan_in);
  std::vector<float> gb_p(fan_out), gb_r(fan_out);
  linear_backward_params(g, x, gw_p, std::span<float>(gb_p), Exec::parallel);
  reference::linear_backward_params(g, x, gw_r, std::span<float>(gb_r));
  expect_same_values(gw_p, gw_r);
  for (std::size_t o = 0; o < fan_out; ++o) EXPECT_TRUE(gb_p[o] == gb_r[o]);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelAgreement,
                         ::testing::Values(Shape{1, 1, 1}, Shape{3, 5, 2}, Shape{7, 33, 129},
                                           Shape{128, 784, 512}, Shape{96, 512, 256},
                                           Shape{17, 256, 10}, Shape{5, 300, 257}));

TEST(Kernels, ReferenceForwardMatchesHandComputation) {
  Matrix<double> x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  Matrix<double> w(2, 2);
  w(0, 0) = 3.0;
  w(0, 1) = -1.0;
  w(1, 0) = 0.5;
  w(1, 1) = 0.25;
  const std::vector<double> b{0.1, -0.2};
  Matrix<double> out(1, 2);
  linear_forward(x, w, std::span<const double>(b), out);
  EXPECT_DOUBLE_EQ(out(0, 0), 1.1);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.8);
}

TEST(Kernels, DoubleParallelEqualsSerial) {
  auto gen = rng::make_engine(5, rng::Stream::synthetic, 0);
  const auto x = random_matrix<double>(9, 40, gen, 0.5);
  const auto w = random_matrix<double>(13, 40, gen);
  const std::vector<double> b(13, 0.5);
  Matrix<double> a(9, 13), c(9, 13);
  linear_forward(x, w, std::span<const double>(b), a, Exec::parallel);
  linear_forward(x, w, std::span<const double>(b), c, Exec::serial);
  expect_same_values(a, c);
}

TEST(Kernels, ShapeMismatchIsContractViolation) {
  Matrix<float> x(2, 3), w(4, 5), out(2, 4);
  const std::vector<float> b(4);
  EXPECT_THROW(linear_forward(x, w, std::span<const float>(b), out), ContractViolation);
  Matrix<float> w_ok(4, 3), bad_out(3, 4);
  EXPECT_THROW(linear_forward(x, w_ok, std::span<const float>(b), bad_out), ContractViolation);
  const std::vector<float> short_b(2);
  EXPECT_THROW(linear_forward(x, w_ok, std::span<const float>(short_b), out), ContractViolation);
  Matrix<float> g(2, 4), gi_bad(2, 4);
  EXPECT_THROW(linear_backward_input(g, w_ok, gi_bad), ContractViolation);
  Matrix<float> gw(4, 3);
  std::vector<float> gb(3);
  EXPECT_THROW(linear_backward_params(g, x, gw, std::span<float>(gb)), ContractViolation);
}

}  // namespace
}  // namespace evoprune::kernels
