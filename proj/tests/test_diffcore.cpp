#include <doctest.h>

#include "aap/core/optim.hpp"
#include "aap/core/ops.hpp"
#include "aap/nn/params.hpp"
#include "support/grad_battery.hpp"

using namespace aap;
using testsup::leaf;

TEST_SUITE_BEGIN("diffcore");

TEST_CASE("matmul identity and shape errors") {
  Tensor I({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(7);
  Tensor A = testsup::random_tensor(rng, 3, 3);
  Tensor out = kern::matmul(I, A);
  for (int64_t i = 0; i < 9; ++i) CHECK(out[i] == doctest::Approx(A[i]));

  Tensor bad({2, 4});
  CHECK_THROWS_AS(kern::matmul(A, bad), ShapeError);
  CHECK_THROWS_WITH_AS(kern::matmul(A, bad), doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("analytic forward values") {
  Tensor z = Tensor::row({0, 0, 0});
  Tensor sm = kern::softmax_rows(z);
  for (int i = 0; i < 3; ++i) CHECK(sm[i] == doctest::Approx(1.0 / 3.0));
  CHECK(kern::tanh(Tensor::scalar(0))[0] == 0.0f);
  CHECK(kern::sigmoid(Tensor::scalar(0))[0] == 0.5f);
}

TEST_CASE("softmax rows are a probability distribution") {
  Rng rng(3);
  for (int it = 0; it < 50; ++it) {
    Tensor x = testsup::random_tensor(rng, 4, 6, -8.0, 8.0);
    Tensor p = kern::softmax_rows(x);
    for (int64_t r = 0; r < 4; ++r) {
      float s = 0.0f;
      for (int64_t c = 0; c < 6; ++c) {
        CHECK(p.at(r, c) >= 0.0f);
        s += p.at(r, c);
      }
      CHECK(s == doctest::Approx(1.0f).epsilon(1e-6));
    }
  }
}

TEST_CASE("backward of x*x") {
  Graph g;
  Node* x = leaf(g, Tensor::scalar(3.0f));
  Node* y = ops::mul(g, x, x);
  g.backward(y);
  CHECK(x->grad[0] == doctest::Approx(6.0f));
}

TEST_CASE("backward requires scalar output") {
  Graph g;
  Node* x = leaf(g, Tensor::row({1, 2}));
  Node* y = ops::tanh(g, x);
  CHECK_THROWS(g.backward(y));
}

TEST_CASE("sum of softmax is constant: zero gradient") {
  Graph g;
  Node* x = leaf(g, Tensor::row({0.3f, -1.2f, 2.0f, 0.1f}));
  Node* s = ops::sum_all(g, ops::softmax_rows(g, x));
  g.backward(s);
  CHECK(s->value[0] == doctest::Approx(1.0f));
  for (int i = 0; i < 4; ++i) CHECK(std::abs(x->grad[i]) < 1e-6f);
}

TEST_CASE("backward is pure: rerun after reset gives identical gradients") {
  Rng rng(11);
  Tensor xv = testsup::random_tensor(rng, 3, 4);
  Graph g;
  Node* x = leaf(g, xv);
  Node* y = ops::sum_all(g, ops::tanh(g, ops::mul(g, x, x)));
  g.backward(y);
  Tensor first = x->grad.clone();
  x->zero_grad();
  g.backward(y);
  for (int64_t i = 0; i < first.size(); ++i) CHECK(x->grad[i] == first[i]);
}

TEST_CASE("graph evaluation is deterministic") {
  Rng rng(5);
  Tensor a = testsup::random_tensor(rng, 4, 4);
  Tensor b = testsup::random_tensor(rng, 4, 4);
  Tensor r1 = kern::matmul(kern::tanh(a), b);
  Tensor r2 = kern::matmul(kern::tanh(a), b);
  for (int64_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("primitive gradients match 64-bit central differences (100 instances)") {
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed)
    worst = std::max(worst, testsup::run_primitive_battery(seed));
  CHECK(worst < 1e-4);
}

TEST_CASE("two-layer MLP gradients match a hand-written double reference") {
  // Loss = sum(tanh(tanh(x W1 + b1) W2 + b2)); shadow in pure double math.
  Rng rng(21);
  const int64_t in = 5, hid = 4, out = 3;
  Tensor x = testsup::random_tensor(rng, 2, in);
  Tensor w1 = testsup::random_tensor(rng, in, hid);
  Tensor b1 = testsup::random_tensor(rng, 1, hid);
  Tensor w2 = testsup::random_tensor(rng, hid, out);
  Tensor b2 = testsup::random_tensor(rng, 1, out);

  testsup::GradCase c;
  c.leaves = {x, w1, b1, w2, b2};
  c.build = [](Graph& g, const std::vector<Node*>& L) {
    Node* h = ops::tanh(g, ops::add_rowvec(g, ops::matmul(g, L[0], L[1]), L[2]));
    Node* o = ops::tanh(g, ops::add_rowvec(g, ops::matmul(g, h, L[3]), L[4]));
    return ops::sum_all(g, o);
  };
  c.ref = [=](const std::vector<std::vector<double>>& a) {
    using namespace oracle;
    DMat xm = testsup::dmat_of(a[0], 2, in);
    DMat h = tanh(add_rowvec(matmul(xm, testsup::dmat_of(a[1], in, hid)),
                             testsup::dmat_of(a[2], 1, hid)));
    DMat o = tanh(add_rowvec(matmul(h, testsup::dmat_of(a[3], hid, out)),
                             testsup::dmat_of(a[4], 1, out)));
    return sum(o);
  };
  CHECK(testsup::check_grad_case(c) < 1e-4);
}

TEST_CASE("adam: zero learning rate leaves parameters unchanged") {
  ParamStore ps;
  Rng rng(1);
  ParamId w = ps.add("w", testsup::random_tensor(rng, 2, 2));
  Tensor before = ps.value(w).clone();
  ps.node(w)->accum_grad(Tensor::full({2, 2}, 1.0f));
  Adam adam;
  adam.step(ps.leaves(), 0.0f);
  for (int64_t i = 0; i < 4; ++i) CHECK(ps.value(w)[i] == before[i]);
}

TEST_CASE("adam: first step magnitude equals the learning rate") {
  ParamStore ps;
  ParamId w = ps.add("w", Tensor::scalar(0.0f));
  ps.node(w)->accum_grad(Tensor::scalar(1.0f));
  Adam adam(AdamConfig{.lr = 1e-3f});
  adam.step(ps.leaves());
  CHECK(ps.value(w)[0] == doctest::Approx(-1e-3).epsilon(1e-4));
}

TEST_CASE("adam: two constant-gradient steps match a scalar double reference") {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, grad = 0.37;
  double p = 0.2, mm = 0.0, vv = 0.0;
  for (int t = 1; t <= 2; ++t) {
    mm = b1 * mm + (1 - b1) * grad;
    vv = b2 * vv + (1 - b2) * grad * grad;
    const double mhat = mm / (1 - std::pow(b1, t));
    const double vhat = vv / (1 - std::pow(b2, t));
    p -= lr * mhat / (std::sqrt(vhat) + eps);
  }

  ParamStore ps;
  ParamId w = ps.add("w", Tensor::scalar(0.2f));
  Adam adam(AdamConfig{.lr = static_cast<float>(lr)});
  for (int t = 0; t < 2; ++t) {
    ps.zero_grads();
    ps.node(w)->accum_grad(Tensor::scalar(static_cast<float>(grad)));
    adam.step(ps.leaves());
  }
  CHECK(std::abs(ps.value(w)[0] - p) < 1e-6);
}

TEST_CASE("adam rejects non-finite gradients") {
  ParamStore ps;
  ParamId w = ps.add("w", Tensor::scalar(0.0f));
  ps.node(w)->accum_grad(Tensor::scalar(std::numeric_limits<float>::quiet_NaN()));
  Adam adam;
  CHECK_THROWS(adam.step(ps.leaves()));
}

TEST_CASE("clip_grad_norm") {
  ParamStore ps;
  ParamId w = ps.add("w", Tensor::zeros({1, 2}));

  SUBCASE("below the threshold: unchanged") {
    ps.node(w)->accum_grad(Tensor::row({0.06f, 0.08f}));  // norm 0.1
    clip_grad_norm(ps.leaves(), 0.5);
    CHECK(ps.node(w)->grad[0] == doctest::Approx(0.06f));
    CHECK(ps.node(w)->grad[1] == doctest::Approx(0.08f));
  }

  SUBCASE("above the threshold: scaled to exactly max_norm") {
    ps.node(w)->accum_grad(Tensor::row({3.0f, 4.0f}));  // norm 5
    clip_grad_norm(ps.leaves(), 0.5);
    CHECK(ps.node(w)->grad[0] == doctest::Approx(0.3f));
    CHECK(ps.node(w)->grad[1] == doctest::Approx(0.4f));
  }

  SUBCASE("post-clip norm never exceeds max_norm (random property)") {
    Rng rng(9);
    for (int it = 0; it < 200; ++it) {
      ps.zero_grads();
      Tensor gv({1, 2});
      gv[0] = static_cast<float>(rng.uniform(-20, 20));
      gv[1] = static_cast<float>(rng.uniform(-20, 20));
      ps.node(w)->accum_grad(gv);
      clip_grad_norm(ps.leaves(), 0.5);
      const double norm = std::hypot(ps.node(w)->grad[0], ps.node(w)->grad[1]);
      CHECK(norm <= 0.5 + 1e-6);
    }
  }
}

TEST_SUITE_END();
