#include <catch_amalgamated.hpp>

#include "mlfa/autodiff.hpp"
#include "mlfa/rng.hpp"
#include "test_util.hpp"

using namespace mlfa;
using testutil::fd_check;
using testutil::random_matrix;

namespace {
constexpr double kTol = 1e-6;  // elementwise ops are exact up to FD error
}

TEST_CASE("forward values of elementwise ops") {
  ad::Tape t;
  auto x = t.constant(Matrix::from_vector({-1.0, 0.0, 2.0}));
  REQUIRE(ad::relu(x).value()(0, 0) == 0.0);
  REQUIRE(ad::relu(x).value()(0, 2) == 2.0);
  REQUIRE(ad::sigmoid(x).value()(0, 1) == 0.5);
  REQUIRE_THAT(ad::tanh_v(x).value()(0, 2), Catch::Matchers::WithinAbs(std::tanh(2.0), 1e-15));
  REQUIRE_THAT(ad::affine(x, 2.0, -1.0).value()(0, 2),
               Catch::Matchers::WithinAbs(3.0, 1e-15));  // 2*2 - 1
}

TEST_CASE("softmax rows are distributions and shift-invariant") {
  Rng rng(3);
  const Matrix logits = random_matrix(rng, 4, 6, 3.0);
  ad::Tape t;
  const Matrix p = ad::softmax_rows(t.constant(logits)).value();
  for (int r = 0; r < p.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < p.cols(); ++c) {
      REQUIRE(p(r, c) >= 0.0);
      REQUIRE(p(r, c) <= 1.0);
      sum += p(r, c);
    }
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  Matrix shifted = logits;
  for (int r = 0; r < shifted.rows(); ++r)
    for (int c = 0; c < shifted.cols(); ++c) shifted(r, c) += 17.25;
  const Matrix p2 = ad::softmax_rows(t.constant(shifted)).value();
  for (size_t i = 0; i < p.size(); ++i)
    REQUIRE_THAT(p2.data()[i], Catch::Matchers::WithinAbs(p.data()[i], 1e-12));
}

TEST_CASE("gradients of unary ops match finite differences") {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 2, 3, 2.0);

  // Weighted sum keeps the cotangent non-uniform; a plain sum would make
  // ops with fixed row sums (softmax) look like constants.
  const auto check_unary = [&](auto op) {
    auto rep = fd_check({x}, [&](ad::Tape& t, std::vector<ad::Var>& l) {
      ad::Var y = op(l[0]);
      Matrix w(y.rows(), y.cols());
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) w(r, c) = 0.4 + std::sin(3.0 * r + c);
      return ad::sum_all(ad::mul(y, t.constant(w)));
    });
    REQUIRE(rep.checked == 6);
    REQUIRE(rep.max_rel < kTol);
  };
  check_unary([](ad::Var v) { return ad::sigmoid(v); });
  check_unary([](ad::Var v) { return ad::tanh_v(v); });
  check_unary([](ad::Var v) { return ad::scale(v, -2.5); });
  check_unary([](ad::Var v) { return ad::affine(v, 1.5, 0.25); });
  check_unary([](ad::Var v) { return ad::softmax_rows(v); });
  check_unary([](ad::Var v) { return ad::mean_rows(v); });
  check_unary([](ad::Var v) { return ad::mean_all(v); });
}

TEST_CASE("relu gradient away from the kink") {
  const Matrix x = Matrix::from_vector({-1.5, 0.75, 2.0, -0.25});
  auto rep = fd_check({x}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::relu(l[0]));
  });
  REQUIRE(rep.max_rel < kTol);
}

TEST_CASE("gradients of binary and structural ops match finite differences") {
  Rng rng(7);
  const Matrix a = random_matrix(rng, 3, 4);
  const Matrix b = random_matrix(rng, 3, 4);
  const Matrix w = random_matrix(rng, 4, 2);
  const Matrix row = random_matrix(rng, 1, 4);

  auto rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::add(l[0], l[1]));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::mul(l[0], l[1]));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, w}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::matmul(l[0], l[1]));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::matmul_nt(l[0], l[1]));  // a . b^T
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, row}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::add_rowvec(l[0], l[1]));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::concat_cols(l[0], l[1]));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    std::vector<ad::Var> parts{l[0], l[1]};
    return ad::sum_all(ad::concat_rows(parts));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::slice_rows(l[0], 1, 3));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({a}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::gather_rows(l[0], {2, 0, 0, 1}));
  });
  REQUIRE(rep.max_rel < kTol);
}

TEST_CASE("conv1d value matches a direct sliding-window oracle") {
  Rng rng(9);
  const int t_in = 9, c_in = 3, c_out = 2, k = 4, stride = 2;
  const Matrix x = random_matrix(rng, t_in, c_in);
  const Matrix w = random_matrix(rng, k * c_in, c_out);
  const Matrix bias = random_matrix(rng, 1, c_out);

  ad::Tape t;
  const Matrix y =
      ad::conv1d(t.constant(x), t.constant(w), t.constant(bias), k, stride).value();
  const int t_out = (t_in - k) / stride + 1;
  REQUIRE(y.rows() == t_out);
  REQUIRE(y.cols() == c_out);
  for (int o = 0; o < t_out; ++o)
    for (int co = 0; co < c_out; ++co) {
      double acc = bias(0, co);
      for (int dk = 0; dk < k; ++dk)
        for (int ci = 0; ci < c_in; ++ci)
          acc += x(o * stride + dk, ci) * w(dk * c_in + ci, co);
      REQUIRE_THAT(y(o, co), Catch::Matchers::WithinAbs(acc, 1e-12));
    }
}

TEST_CASE("conv1d and mean_pool_windows gradients match finite differences") {
  Rng rng(13);
  const Matrix x = random_matrix(rng, 9, 3);
  const Matrix w = random_matrix(rng, 4 * 3, 2);
  const Matrix bias = random_matrix(rng, 1, 2);

  auto rep = fd_check({x, w, bias}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::conv1d(l[0], l[1], l[2], 4, 2));
  });
  REQUIRE(rep.max_rel < kTol);

  rep = fd_check({x}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    return ad::sum_all(ad::mean_pool_windows(l[0], 5, 2));
  });
  REQUIRE(rep.max_rel < kTol);
}

TEST_CASE("mean_pool_windows value") {
  ad::Tape t;
  Matrix x(4, 1);
  x(0, 0) = 1.0;
  x(1, 0) = 2.0;
  x(2, 0) = 3.0;
  x(3, 0) = 4.0;
  const Matrix y = ad::mean_pool_windows(t.constant(x), 2, 2).value();
  REQUIRE(y.rows() == 2);
  REQUIRE(y(0, 0) == 1.5);
  REQUIRE(y(1, 0) == 3.5);
}

TEST_CASE("custom_scalar injects analytic gradients") {
  // f(a, b) = a0*a0 + 3*b0 with hand-supplied partials.
  const Matrix a = Matrix::from_vector({2.0});
  const Matrix b = Matrix::from_vector({-1.0});
  auto rep = fd_check({a, b}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    const double av = l[0].scalar(), bv = l[1].scalar();
    return ad::custom_scalar(t, {l[0], l[1]}, av * av + 3.0 * bv,
                             {Matrix::from_vector({2.0 * av}), Matrix::from_vector({3.0})});
  });
  REQUIRE(rep.max_rel < kTol);
}

TEST_CASE("gradient accumulates through a reused node") {
  // y = sum(x) + sum(x .* x): dy/dx = 1 + 2x.
  const Matrix x = Matrix::from_vector({0.5, -2.0});
  ad::Tape t;
  auto v = t.leaf(x, true);
  auto y = ad::add(ad::sum_all(v), ad::sum_all(ad::mul(v, v)));
  t.backward(y);
  const Matrix& g = t.grad(v.id);
  REQUIRE_THAT(g(0, 0), Catch::Matchers::WithinAbs(1.0 + 2.0 * 0.5, 1e-12));
  REQUIRE_THAT(g(0, 1), Catch::Matchers::WithinAbs(1.0 + 2.0 * -2.0, 1e-12));
}

TEST_CASE("named parameter grads are collected per name") {
  ad::Tape t;
  auto w = t.param("w", Matrix::from_vector({3.0}));
  auto y = ad::mul(w, w);
  t.backward(y);
  const auto grads = t.named_grads();
  REQUIRE(grads.size() == 1);
  REQUIRE(grads[0].first == "w");
  REQUIRE_THAT((*grads[0].second)(0, 0), Catch::Matchers::WithinAbs(6.0, 1e-12));
  REQUIRE_THROWS_AS(t.param("w", Matrix(1, 1)), ShapeMismatch);
}

TEST_CASE("backward rejects non-scalar roots") {
  ad::Tape t;
  auto v = t.leaf(Matrix(2, 2), true);
  REQUIRE_THROWS_AS(t.backward(v), ShapeMismatch);
}

TEST_CASE("composite expression gradient (mini attention block)") {
  Rng rng(21);
  const Matrix q = random_matrix(rng, 2, 4);
  const Matrix k = random_matrix(rng, 3, 4);
  const Matrix v = random_matrix(rng, 3, 4);
  auto rep = fd_check({q, k, v}, [](ad::Tape& t, std::vector<ad::Var>& l) {
    auto attn = ad::softmax_rows(ad::scale(ad::matmul_nt(l[0], l[1]), 0.5));
    return ad::sum_all(ad::sigmoid(ad::matmul(attn, l[2])));
  });
  REQUIRE(rep.max_rel < 1e-5);
}
