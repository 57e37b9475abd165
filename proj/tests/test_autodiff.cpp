#include "doctest.h"

#include <cmath>

#include "fssc/ops.hpp"
#include "fssc/optim.hpp"
#include "fssc/params.hpp"
#include "gradcheck.hpp"

using namespace fssc;
using fssc::testing::gradcheck;
using fssc::testing::random_tensor;
using T = Tensor<double>;

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(T({2, 3}, Vec<double>::Zero(5)), DimensionError);
  CHECK_THROWS_AS(T({0, 3}), DimensionError);
  T plain = T::full({3}, 1.0);
  T w = T::full({3}, 2.0, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  T loss = sum(mul(plain, w));
  tape.backward(loss);
  CHECK_FALSE(plain.has_grad());
  REQUIRE(w.has_grad());
  CHECK(w.grad().size() == w.numel());
}

TEST_CASE("matmul values and errors") {
  const T eye = T::from({2, 2}, {1, 0, 0, 1});
  const T m = T::from({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m).value() == m.value());
  CHECK(matmul(T::from({1, 2}, {1, 2}), T::from({2, 1}, {3, 4})).item() == 11.0);
  try {
    matmul(T::zeros({2, 3}), T::zeros({2, 3}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A*B)") {
  Rng rng(1);
  T a = random_tensor({3, 3}, rng), b = random_tensor({3, 3}, rng);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    T loss = sum(matmul(a, b));
    tape.backward(loss);
  }
  const Eigen::MatrixXd expected = Eigen::MatrixXd::Ones(3, 3) * b.matrix(3, 3).transpose();
  CHECK((Eigen::Map<const RowMatrix<double>>(a.grad().data(), 3, 3) - expected)
            .norm() < 1e-12);
  CHECK(gradcheck([&] { return matmul(a, b); }, {a, b}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return matmul(a, b, true, false); }, {a, b}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return matmul(a, b, false, true); }, {a, b}).max_rel_error < 1e-6);
  T x = random_tensor({2, 3, 4}, rng), y = random_tensor({2, 4, 2}, rng);
  CHECK(gradcheck([&] { return matmul(x, y); }, {x, y}).max_rel_error < 1e-6);
}

TEST_CASE("elementwise ops") {
  Rng rng(2);
  T x = random_tensor({2, 5}, rng), z = T::zeros({2, 5});
  CHECK(add(x, z).value() == x.value());
  CHECK(gelu(T::scalar(0.0)).item() == 0.0);
  CHECK(sigmoid(T::scalar(0.0)).item() == doctest::Approx(0.5));
  T g = T::from({4}, {-2, -0.5, 0.5, 2}, true);
  CHECK(gradcheck([&] { return gelu(g); }, {g}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return sigmoid(g); }, {g}).max_rel_error < 1e-6);
  T y = random_tensor({2, 5}, rng), row = random_tensor({5}, rng), one = random_tensor({1}, rng);
  CHECK(gradcheck([&] { return add(x, y); }, {x, y}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return sub(x, row); }, {x, row}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return mul(x, row); }, {x, row}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return mul(x, one); }, {x, one}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return scale(x, 0.3); }, {x}).max_rel_error < 1e-6);
  CHECK_THROWS_AS(add(x, T::zeros({2})), DimensionError);
  CHECK_THROWS_AS(add(x, T::zeros({5, 2})), DimensionError);
}

TEST_CASE("softmax") {
  const T u = softmax(T::from({3}, {0, 0, 0}));
  for (Index i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3));
  const T big = softmax(T::from({2}, {1000, 1000}));
  CHECK(big[0] == 0.5);
  CHECK(big[1] == 0.5);
  Rng rng(3);
  T x = random_tensor({4, 6}, rng, 3.0);
  const T s = softmax(x);
  for (Index r = 0; r < 4; ++r) CHECK(std::abs(s.matrix(4, 6).row(r).sum() - 1.0) < 1e-12);
  T p = T::from({3}, {0.1, 0.7, -0.3}, true);
  CHECK(gradcheck([&] { return softmax(p); }, {p}).max_rel_error < 1e-6);
  T q = random_tensor({2, 3, 4}, rng);
  CHECK(gradcheck([&] { return softmax(q, 1); }, {q}).max_rel_error < 1e-6);
}

TEST_CASE("layer_norm") {
  const T gain = T::full({4}, 1.0), bias = T::zeros({4});
  const T c = layer_norm(T::full({1, 4}, 3.0), gain, bias);
  CHECK(c.value().cwiseAbs().maxCoeff() == 0.0);
  const T r = layer_norm(T::from({1, 2}, {1, -1}), T::full({2}, 1.0), T::zeros({2}));
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r[1] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK_THROWS_AS(layer_norm(T::zeros({2, 3}), gain, bias), DimensionError);
  Rng rng(4);
  T x = random_tensor({4, 8}, rng), g = random_tensor({8}, rng), b = random_tensor({8}, rng);
  CHECK(gradcheck([&] { return layer_norm(x, g, b); }, {x, g, b}).max_rel_error < 1e-5);
}

TEST_CASE("reshape, permute, gather") {
  Rng rng(5);
  T x = random_tensor({2, 3, 4}, rng);
  CHECK(reshape(reshape(x, {6, 4}), {2, 3, 4}).value() == x.value());
  CHECK_THROWS_AS(reshape(x, {5, 5}), DimensionError);
  const T p = permute(x, {2, 0, 1});
  CHECK(p.shape() == Shape{4, 2, 3});
  CHECK(p.value()[1 * 6 + 1 * 3 + 2] == x.value()[1 * 12 + 2 * 4 + 1]);
  CHECK(permute(p, {1, 2, 0}).value() == x.value());
  CHECK(gradcheck([&] { return permute(x, {2, 0, 1}); }, {x}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return reshape(x, {4, 6}); }, {x}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return gather(x, 1, {2, 0, 2, 1}); }, {x}).max_rel_error < 1e-6);
  CHECK_THROWS_AS(gather(x, 1, {3}), DimensionError);
}

TEST_CASE("reductions and mse") {
  Rng rng(6);
  T x = random_tensor({3, 4}, rng), y = random_tensor({3, 4}, rng);
  CHECK(sum(x).item() == doctest::Approx(x.value().sum()));
  CHECK(mean(x).item() == doctest::Approx(x.value().mean()));
  CHECK(mse_loss(x, y).item() == doctest::Approx((x.value() - y.value()).squaredNorm() / 12));
  CHECK(gradcheck([&] { return mse_loss(x, y); }, {x, y}).max_rel_error < 1e-6);
  CHECK(gradcheck([&] { return mean(x); }, {x}).max_rel_error < 1e-6);
}

TEST_CASE("conv2d identity, adjoint and gradients") {
  Rng rng(7);
  T x = random_tensor({2, 3, 6, 6}, rng);
  T one = T::zeros({3, 3, 1, 1});
  for (Index c = 0; c < 3; ++c) one.value()[c * 3 + c] = 1.0;
  CHECK(conv2d(x, one, T(), 1).value() == x.value());

  for (Index stride : {1, 2}) {
    T k = random_tensor({4, 3, 3, 3}, rng);
    T in = random_tensor({2, 3, 6, 6}, rng, 1.0, false);
    const T cx = conv2d(in, k, T(), stride);
    T yy = random_tensor(cx.shape(), rng, 1.0, false);
    const T ay = conv2d_transposed(yy, k, T(), stride);
    REQUIRE(ay.shape() == in.shape());
    CHECK(std::abs(cx.value().dot(yy.value()) - in.value().dot(ay.value())) < 1e-9);
  }

  T small = random_tensor({1, 1, 4, 4}, rng), k = random_tensor({1, 1, 3, 3}, rng),
    b = random_tensor({1}, rng);
  CHECK(gradcheck([&] { return conv2d(small, k, b, 1); }, {small, k, b}).max_rel_error < 1e-5);
  T wide = random_tensor({2, 2, 4, 4}, rng), k2 = random_tensor({3, 2, 3, 3}, rng);
  CHECK(gradcheck([&] { return conv2d(wide, k2, T(), 2); }, {wide, k2}).max_rel_error < 1e-5);
  T up = random_tensor({2, 3, 2, 2}, rng), bt = random_tensor({2}, rng);
  CHECK(gradcheck([&] { return conv2d_transposed(up, k2, bt, 2); }, {up, k2, bt}).max_rel_error <
        1e-5);
  CHECK_THROWS_AS(conv2d(wide, k2, T(), 0), DimensionError);
  CHECK_THROWS_AS(conv2d(T::zeros({1, 3, 4, 4}), k2, T(), 1), DimensionError);
}

TEST_CASE("two-layer MLP end to end") {
  Rng rng(8);
  T x = random_tensor({5, 4}, rng, 1.0, false);
  T w1 = random_tensor({4, 6}, rng), b1 = random_tensor({6}, rng);
  T w2 = random_tensor({6, 2}, rng), b2 = random_tensor({2}, rng);
  auto f = [&] { return linear(gelu(linear(x, w1, b1)), w2, b2); };
  CHECK(gradcheck(f, {w1, b1, w2, b2}).max_rel_error < 1e-5);
}

TEST_CASE("shared input accumulates gradients") {
  T x = T::from({2}, {1.5, -2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  T loss = sum(add(mul(x, x), x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(-3.0));
}

TEST_CASE("forward evaluation is deterministic") {
  Rng a(11), b(11);
  T x = random_tensor({3, 8}, a), y = random_tensor({3, 8}, b);
  T g = T::full({8}, 1.0), z = T::zeros({8});
  CHECK(layer_norm(gelu(x), g, z).value() == layer_norm(gelu(y), g, z).value());
}

namespace {
ModelParams<double> scalar_params(double w, double grad) {
  ModelParams<double> p;
  T& t = p.add("w", T::scalar(w, true));
  t.grad() = Vec<double>::Constant(1, grad);
  return p;
}
}  // namespace

TEST_CASE("optimizer steps") {
  SUBCASE("sgd hand arithmetic") {
    auto p = scalar_params(1.0, 2.0);
    Optimizer<double> opt({OptimizerKind::Sgd, 0.5});
    opt.step(p);
    CHECK(p[0].item() == 0.0);
    CHECK_FALSE(p[0].has_grad());
  }
  SUBCASE("sgd with zero learning rate is exact") {
    auto p = scalar_params(0.123456789, 7.0);
    Optimizer<double> opt({OptimizerKind::Sgd, 0.0});
    opt.step(p);
    CHECK(p[0].item() == 0.123456789);
  }
  SUBCASE("adam first step") {
    auto p = scalar_params(1.0, 0.25);
    Optimizer<double> opt;
    opt.step(p);
    const double m = 0.1 * 0.25 / (1 - 0.9), v = 0.001 * 0.0625 / (1 - 0.999);
    CHECK(p[0].item() == doctest::Approx(1.0 - 1e-3 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-14));
    CHECK(opt.first_moments()[0].size() == 1);
    CHECK(opt.second_moments()[0].size() == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = scalar_params(0.75, 0.0);
    Optimizer<double> opt;
    opt.step(p);
    CHECK(p[0].item() == 0.75);
  }
  SUBCASE("missing gradient") {
    ModelParams<double> p;
    p.add("w", T::scalar(1.0, true));
    Optimizer<double> opt;
    CHECK_THROWS_AS(opt.step(p), TrainingError);
  }
  CHECK(OptimizerConfig{}.learning_rate == 1e-3);
}

TEST_CASE("parameter blob round trip") {
  Rng rng(12);
  ModelParams<double> p;
  p.add("a", random_tensor({2, 3}, rng));
  p.add("b.c", random_tensor({4}, rng));
  CHECK_THROWS(p.add("a", random_tensor({1}, rng)));
  std::stringstream ss;
  write_params(ss, p);
  const auto q = read_params<double>(ss);
  CHECK(p.schema_mismatch(q).empty());
  CHECK(q.at("b.c").value() == p.at("b.c").value());
  std::stringstream sf;
  write_params(sf, p.cast<float>());
  const auto r = read_params<double>(sf);
  CHECK(r.at("a").value().cast<float>() == p.at("a").value().cast<float>());
  std::stringstream bad("FSSCPAR1\x05");
  CHECK_THROWS_AS(read_params<double>(bad), FormatError);
}
