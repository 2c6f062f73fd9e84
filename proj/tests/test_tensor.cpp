#include <cmath>
#include <cstring>

#include "doctest.h"
#include "fg/rng.hpp"
#include "fg/tensor.hpp"
#include "oracles.hpp"

using namespace fg;

namespace {

Tensor t1(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}
Tensor t2(int r, int c, std::vector<double> v) { return Tensor({r, c}, std::move(v)); }

} // namespace

TEST_SUITE("tensor") {

TEST_CASE("shape contract") {
  CHECK_THROWS_AS(Tensor({0}), Error);
  CHECK_THROWS_AS(Tensor({2, -1}), Error);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), Error);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
}

TEST_CASE("matmul identity") {
  Tape tape;
  Var a = tape.leaf(t2(2, 2, {1, 2, 3, 4}));
  Var eye = tape.leaf(t2(2, 2, {1, 0, 0, 1}));
  Var r = matmul(a, eye);
  CHECK(r.val().at(0, 0) == 1.0);
  CHECK(r.val().at(0, 1) == 2.0);
  CHECK(r.val().at(1, 0) == 3.0);
  CHECK(r.val().at(1, 1) == 4.0);
}

TEST_CASE("exp of zero") {
  Tape tape;
  Var r = vexp(tape.leaf(t1({0.0})));
  CHECK(r.val()[0] == 1.0);
}

TEST_CASE("sum of ones") {
  Tape tape;
  Var r = sum(tape.leaf(Tensor::full({3, 3}, 1.0)));
  CHECK(r.val()[0] == 9.0);
}

TEST_CASE("shape mismatch raises") {
  Tape tape;
  Var a = tape.leaf(t1({1, 2, 3}));
  Var b = tape.leaf(t1({1, 2}));
  CHECK_THROWS_AS(add(a, b), Error);
  Var m = tape.leaf(t2(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK_THROWS_AS(matmul(m, m), Error);
}

TEST_CASE("log and sqrt domain errors") {
  Tape tape;
  CHECK_THROWS_AS(vlog(tape.leaf(t1({1.0, 0.0}))), Error);
  CHECK_THROWS_AS(vlog(tape.leaf(t1({-1.0}))), Error);
  CHECK_THROWS_AS(vsqrt(tape.leaf(t1({0.0}))), Error);
}

TEST_CASE("non-finite output raises numeric error") {
  Tape tape;
  Var big = tape.leaf(t1({1e308}));
  CHECK_THROWS_AS(vexp(big), Error);       // overflow to inf
  Var z = tape.leaf(t1({0.0}));
  CHECK_THROWS_AS(div(big, z), Error);     // inf
}

TEST_CASE("backward of sum(x*x)") {
  Tape tape;
  Var x = tape.leaf(t1({1, 2, 3}));
  Var out = sum(mul(x, x));
  auto grads = tape.gradients(out, {x});
  CHECK(grads[0][0] == doctest::Approx(2.0));
  CHECK(grads[0][1] == doctest::Approx(4.0));
  CHECK(grads[0][2] == doctest::Approx(6.0));
}

TEST_CASE("backward of linear map w^T x") {
  Tape tape;
  Var w = tape.leaf(t2(1, 2, {1, 1}));
  Var x = tape.leaf(t2(2, 1, {3, 5}), false);
  Var out = sum(matmul(w, x));
  auto grads = tape.gradients(out, {w});
  CHECK(grads[0][0] == doctest::Approx(3.0));
  CHECK(grads[0][1] == doctest::Approx(5.0));
}

TEST_CASE("backward requires scalar output") {
  Tape tape;
  Var x = tape.leaf(t1({1, 2}));
  CHECK_THROWS_AS(tape.backward(mul(x, x), {x.id}), Error);
}

TEST_CASE("gradient of unreached leaf is zero") {
  Tape tape;
  Var x = tape.leaf(t1({1, 2}));
  Var y = tape.leaf(t1({3, 4}));
  Var out = sum(square(x));
  auto grads = tape.gradients(out, {x, y});
  CHECK(grads[1][0] == 0.0);
  CHECK(grads[1][1] == 0.0);
  CHECK(grads[1].same_shape(y.val()));
}

// Every primitive's reverse rule against central finite differences on
// randomized inputs.
TEST_CASE("per-primitive finite difference check") {
  Rng rng(12345);

  struct Case {
    const char* name;
    int n_inputs;
    std::vector<int> shape_a, shape_b;
    bool positive_only;
    std::function<Var(Tape&, Var, Var)> build;
  };

  auto unary = [](Var (*f)(Var)) {
    return [f](Tape&, Var a, Var) { return f(a); };
  };

  std::vector<Case> cases = {
      {"add", 2, {4, 3}, {4, 3}, false, [](Tape&, Var a, Var b) { return add(a, b); }},
      {"add_rowbcast", 2, {4, 3}, {3}, false, [](Tape&, Var a, Var b) { return add(a, b); }},
      {"add_scalar", 2, {4, 3}, {1}, false, [](Tape&, Var a, Var b) { return add(a, b); }},
      {"sub", 2, {4, 3}, {4, 3}, false, [](Tape&, Var a, Var b) { return sub(a, b); }},
      {"mul", 2, {4, 3}, {4, 3}, false, [](Tape&, Var a, Var b) { return mul(a, b); }},
      {"mul_rowbcast", 2, {4, 3}, {3}, false, [](Tape&, Var a, Var b) { return mul(a, b); }},
      {"div", 2, {3, 3}, {3, 3}, true, [](Tape&, Var a, Var b) { return div(a, b); }},
      {"matmul", 2, {3, 4}, {4, 2}, false, [](Tape&, Var a, Var b) { return matmul(a, b); }},
      {"transpose", 1, {3, 4}, {}, false, unary(transpose)},
      {"exp", 1, {3, 3}, {}, false, unary(vexp)},
      {"log", 1, {3, 3}, {}, true, unary(vlog)},
      {"tanh", 1, {3, 3}, {}, false, unary(vtanh)},
      {"relu", 1, {3, 3}, {}, false, unary(relu)},
      {"sigmoid", 1, {3, 3}, {}, false, unary(sigmoid)},
      {"softplus", 1, {3, 3}, {}, false, unary(softplus)},
      {"neg", 1, {3, 3}, {}, false, unary(neg)},
      {"square", 1, {3, 3}, {}, false, unary(square)},
      {"sqrt", 1, {3, 3}, {}, true, unary(vsqrt)},
      {"sqrt_guard", 1, {3, 3}, {}, true, unary(sqrt_guard)},
      {"clamp", 1, {3, 3}, {}, false, [](Tape&, Var a, Var) { return clamp(a, -0.35, 0.35); }},
      {"sum", 1, {4, 3}, {}, false, unary(sum)},
      {"sum_axis0", 1, {4, 3}, {}, false, [](Tape&, Var a, Var) { return sum_axis(a, 0); }},
      {"sum_axis1", 1, {4, 3}, {}, false, [](Tape&, Var a, Var) { return sum_axis(a, 1); }},
      {"mean", 1, {4, 3}, {}, false, unary(mean)},
      {"broadcast", 1, {3}, {}, false, [](Tape&, Var a, Var) { return broadcast_to(a, {5, 3}); }},
      {"reshape", 1, {4, 3}, {}, false, [](Tape&, Var a, Var) { return reshape(a, {2, 6}); }},
      {"slice_cols", 1, {4, 5}, {}, false, [](Tape&, Var a, Var) { return slice(a, 1, 1, 3); }},
      {"slice_rows", 1, {4, 5}, {}, false, [](Tape&, Var a, Var) { return slice(a, 0, 2, 2); }},
      {"concat_cols", 2, {3, 2}, {3, 4}, false, [](Tape&, Var a, Var b) { return concat(a, b, 1); }},
      {"concat_rows", 2, {2, 3}, {4, 3}, false, [](Tape&, Var a, Var b) { return concat(a, b, 0); }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto fill = [&](const std::vector<int>& shape) {
      Tensor t(shape);
      for (int i = 0; i < t.size(); ++i) {
        double v = 0.25 + 0.75 * rng.uniform() + (c.positive_only ? 0.25 : 0.0);
        if (!c.positive_only && rng.uniform() < 0.5) v = -v;
        t[i] = v;
      }
      return t;
    };
    Tensor va = fill(c.shape_a);
    Tensor vb = c.n_inputs == 2 ? fill(c.shape_b) : Tensor::scalar(0);

    // weighted scalarization keeps every output coordinate in play
    auto scalarize = [&](Tape& tape, Var out) {
      Tensor w(out.val().shape());
      Rng wr(99);
      for (int i = 0; i < w.size(); ++i) w[i] = 0.5 + wr.uniform();
      return sum(mul(out, tape.constant(w)));
    };

    auto eval = [&](const std::vector<double>& theta) {
      Tape tape;
      Tensor ta = va, tb = vb;
      for (int i = 0; i < ta.size(); ++i) ta[i] = theta[static_cast<size_t>(i)];
      if (c.n_inputs == 2)
        for (int i = 0; i < tb.size(); ++i) tb[i] = theta[static_cast<size_t>(ta.size() + i)];
      Var a = tape.leaf(ta), b = c.n_inputs == 2 ? tape.leaf(tb) : Var{};
      return scalarize(tape, c.build(tape, a, b)).val()[0];
    };

    std::vector<double> theta(va.data(), va.data() + va.size());
    if (c.n_inputs == 2) theta.insert(theta.end(), vb.data(), vb.data() + vb.size());

    Tape tape;
    Var a = tape.leaf(va), b = c.n_inputs == 2 ? tape.leaf(vb) : Var{};
    Var out = scalarize(tape, c.build(tape, a, b));
    std::vector<Var> wrt{a};
    if (c.n_inputs == 2) wrt.push_back(b);
    auto grads = tape.gradients(out, wrt);

    std::vector<double> fd = finite_diff_gradient(eval, theta, 1e-5);
    size_t k = 0;
    for (const auto& g : grads)
      for (int i = 0; i < g.size(); ++i, ++k) {
        CAPTURE(k);
        CHECK(oracle::close_rel(g[i], fd[k], 1e-5));
      }
  }
}

TEST_CASE("random mlp gradient matches finite differences") {
  // 5-parameter network: w1[1x2], b1[2], w2[2x1] reduced to scalar... use
  // a 2-in 2-hidden tanh net evaluated at a fixed point.
  Rng rng(7);
  std::vector<double> theta(11);
  for (auto& v : theta) v = rng.normal() * 0.7;
  Tensor x0 = t2(1, 2, {0.3, -0.8});

  auto eval = [&](const std::vector<double>& th) {
    Tape tape;
    Var x = tape.leaf(x0, false);
    Var w1 = tape.leaf(t2(2, 2, {th[0], th[1], th[2], th[3]}));
    Var b1 = tape.leaf(t1({th[4], th[5]}));
    Var w2 = tape.leaf(t2(2, 1, {th[6], th[7]}));
    Var b2 = tape.leaf(t1({th[8]}));
    Var s = tape.leaf(t1({th[9], th[10]}));
    Var h = vtanh(add(matmul(mul(x, s), w1), b1));
    Var out = add(matmul(h, w2), b2);
    return sum(out).val()[0];
  };

  Tape tape;
  Var x = tape.leaf(x0, false);
  Var w1 = tape.leaf(t2(2, 2, {theta[0], theta[1], theta[2], theta[3]}));
  Var b1 = tape.leaf(t1({theta[4], theta[5]}));
  Var w2 = tape.leaf(t2(2, 1, {theta[6], theta[7]}));
  Var b2 = tape.leaf(t1({theta[8]}));
  Var s = tape.leaf(t1({theta[9], theta[10]}));
  Var out = sum(add(matmul(vtanh(add(matmul(mul(x, s), w1), b1)), w2), b2));
  auto grads = tape.gradients(out, {w1, b1, w2, b2, s});

  std::vector<double> fd = finite_diff_gradient(eval, theta, 1e-5);
  size_t k = 0;
  for (const auto& g : grads)
    for (int i = 0; i < g.size(); ++i, ++k) CHECK(oracle::close_rel(g[i], fd[k], 1e-5));
}

TEST_CASE("batch sum gradient equals sum of per-sample gradients") {
  Rng rng(3);
  Tensor xb({4, 3});
  for (int i = 0; i < xb.size(); ++i) xb[i] = rng.normal();
  Tensor w0({3, 1});
  for (int i = 0; i < w0.size(); ++i) w0[i] = rng.normal();

  auto grad_for = [&](const Tensor& batch) {
    Tape tape;
    Var w = tape.leaf(w0);
    Var out = sum(vtanh(matmul(tape.leaf(batch, false), w)));
    return tape.gradients(out, {w})[0];
  };

  Tensor full = grad_for(xb);
  Tensor acc({3, 1});
  for (int r = 0; r < 4; ++r) {
    Tensor row({1, 3});
    for (int j = 0; j < 3; ++j) row.at(0, j) = xb.at(r, j);
    Tensor g = grad_for(row);
    for (int i = 0; i < 3; ++i) acc[i] += g[i];
  }
  for (int i = 0; i < 3; ++i) CHECK(full[i] == doctest::Approx(acc[i]).epsilon(1e-12));
}

TEST_CASE("tape replay is bit-deterministic") {
  auto run = [] {
    Rng rng(11);
    Tape tape;
    Tensor xv({8, 4});
    for (int i = 0; i < xv.size(); ++i) xv[i] = rng.normal();
    Tensor wv({4, 4});
    for (int i = 0; i < wv.size(); ++i) wv[i] = rng.normal();
    Var x = tape.leaf(xv, false);
    Var w = tape.leaf(wv);
    Var out = mean(square(vtanh(matmul(x, w))));
    return tape.gradients(out, {w})[0];
  };
  Tensor a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("double backward of gradient-norm penalty") {
  // Linear critic D(x) = w^T x: penalty (||w||-1)^2, phi-gradient
  // 2(||w||-1) w/||w||.
  SUBCASE("linear critic closed form") {
    Tape tape;
    Tensor wv = t2(2, 1, {0.6, -0.8}); // ||w|| = 1 exactly
    Var w = tape.leaf(wv);
    Var x = tape.leaf(t2(3, 2, {0.1, 0.2, -0.5, 0.3, 0.9, -0.2}), true);
    Var d = matmul(x, w);
    auto g = tape.backward(sum(d), {x.id});
    REQUIRE(g[0] >= 0);
    Var gx{&tape, g[0]};
    Var norm = sqrt_guard(sum_axis(square(gx), 1));
    Var penalty = mean(square(norm + (-1.0)));
    CHECK(penalty.val()[0] == doctest::Approx(0.0));

    auto pgrad = tape.gradients(penalty, {w});
    CHECK(pgrad[0][0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(pgrad[0][1] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("linear critic away from unit norm") {
    Tape tape;
    Tensor wv = t2(2, 1, {1.5, -2.0});
    double nw = std::sqrt(1.5 * 1.5 + 2.0 * 2.0);
    Var w = tape.leaf(wv);
    Var x = tape.leaf(t2(2, 2, {0.3, 0.4, -0.1, 0.2}), true);
    auto g = tape.backward(sum(matmul(x, w)), {x.id});
    Var gx{&tape, g[0]};
    Var penalty = mean(square(sqrt_guard(sum_axis(square(gx), 1)) + (-1.0)));
    auto pgrad = tape.gradients(penalty, {w});
    CHECK(pgrad[0][0] == doctest::Approx(2.0 * (nw - 1.0) * 1.5 / nw));
    CHECK(pgrad[0][1] == doctest::Approx(2.0 * (nw - 1.0) * -2.0 / nw));
  }

  SUBCASE("constant critic: penalty 1, zero phi-gradient, no nan") {
    Tape tape;
    Var w = tape.leaf(t2(2, 1, {0.0, 0.0}));
    Var b = tape.leaf(t1({0.7}));
    Var x = tape.leaf(t2(3, 2, {0.1, 0.2, -0.5, 0.3, 0.9, -0.2}), true);
    Var d = add(matmul(x, w), broadcast_to(b, {3, 1}));
    auto g = tape.backward(sum(d), {x.id});
    REQUIRE(g[0] >= 0);
    Var gx{&tape, g[0]};
    Var penalty = mean(square(sqrt_guard(sum_axis(square(gx), 1)) + (-1.0)));
    CHECK(penalty.val()[0] == doctest::Approx(1.0));
    auto pg = tape.gradients(penalty, {w, b});
    CHECK(pg[0][0] == 0.0);
    CHECK(pg[0][1] == 0.0);
    CHECK(pg[1][0] == 0.0);
  }
}

TEST_CASE("finite_diff_gradient itself") {
  auto sq = [](const std::vector<double>& th) { return th[0] * th[0]; };
  auto g = finite_diff_gradient(sq, {3.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));

  auto sn = [](const std::vector<double>& th) { return std::sin(th[0]); };
  CHECK(finite_diff_gradient(sn, {0.0}, 1e-5)[0] == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(finite_diff_gradient(sq, {1.0}, 0.0), Error);
  auto bad = [](const std::vector<double>&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_diff_gradient(bad, {1.0}, 1e-5), Error);
}

} // TEST_SUITE
