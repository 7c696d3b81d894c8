#include <doctest.h>

#include <cmath>

#include "aapl/grad_check.hpp"
#include "aapl/rng.hpp"
#include "aapl/tensor.hpp"

using namespace aapl;

namespace {

Tensor random_vector(int n, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(7);
  Tensor a = Tensor::randn({3, 3}, rng, 1.0);
  Tensor prod = matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(prod[i] == a[i]);

  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor v = Tensor::matrix(2, 1, {0, 1});
  Tensor r = matmul(m, v);
  CHECK(r[0] == 2.0);
  CHECK(r[1] == 4.0);

  CHECK_THROWS_AS(matmul(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                         Tensor::matrix(2, 2, {1, 2, 3, 4})),
                  ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  Tensor b = Tensor::randn({5, 3}, rng, 1.0);
  Tensor a0 = Tensor::randn({4, 5}, rng, 1.0);
  // d(sum(A B))/dA
  const double err_a = grad_check(
      [&b](const Tensor& a) { return sum(matmul(a, b)); }, a0, 1e-5);
  CHECK(err_a < 1e-6);
  // d(sum(A B))/dB
  const double err_b = grad_check(
      [&a0](const Tensor& b2) { return sum(matmul(a0, b2)); }, b, 1e-5);
  CHECK(err_b < 1e-6);
  // matrix-vector path
  Tensor x = Tensor::randn({5}, rng, 1.0);
  const double err_x = grad_check(
      [&a0](const Tensor& v) { return sum(matmul(a0, v)); }, x, 1e-5);
  CHECK(err_x < 1e-6);
}

TEST_CASE("elementwise basics") {
  Tensor x = Tensor::from_vector({-1, 0, 2});
  Tensor r = relu(x);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  Tensor z = sub(x, x);
  for (int i = 0; i < 3; ++i) CHECK(z[i] == 0.0);

  CHECK_THROWS_AS(add(x, Tensor::from_vector({1, 2})), ShapeError);

  Rng rng(3);
  Tensor p = random_vector(6, rng);
  CHECK(grad_check([](const Tensor& t) { return sum(t); }, p, 1e-5) <
        1e-9);  // add/sum gradient is exactly ones
  CHECK(grad_check([](const Tensor& t) { return sum(scale(t, 3.25)); }, p,
                   1e-5) < 1e-6);
  // relu checked away from the kink
  Tensor q = Tensor::from_vector({-1.5, 0.75, 2.25, -0.5});
  CHECK(grad_check([](const Tensor& t) { return sum(relu(t)); }, q, 1e-5) <
        1e-6);
}

TEST_CASE("cosine similarity values") {
  Tensor u = Tensor::from_vector({0.3, -1.2, 0.7});
  CHECK(cosine_similarity(u, u).value() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor e1 = Tensor::from_vector({1, 0});
  Tensor e2 = Tensor::from_vector({0, 1});
  CHECK(cosine_similarity(e1, e2).value() == 0.0);

  Tensor a = Tensor::from_vector({1, 1});
  CHECK(cosine_similarity(a, e1).value() ==
        doctest::Approx(0.7071067811865475).epsilon(1e-15));

  CHECK_THROWS_AS(cosine_similarity(Tensor::from_vector({0, 0}), e1),
                  DegenerateInputError);
}

TEST_CASE("cosine similarity stays within [-1, 1] band") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    Tensor u = random_vector(8, rng);
    Tensor v = random_vector(8, rng);
    const double c = cosine_similarity(u, v).value();
    CHECK(c >= -1.0 - 1e-12);
    CHECK(c <= 1.0 + 1e-12);
  }
}

TEST_CASE("euclidean distance values and gradient") {
  Tensor u = Tensor::from_vector({0.1, 0.2});
  CHECK(euclidean_distance(u, u).value() == 0.0);
  CHECK(euclidean_distance(Tensor::from_vector({0, 0}),
                           Tensor::from_vector({3, 4}))
            .value() == 5.0);

  // Zero gradient at coincident points, by definition.
  {
    Tape tape;
    Tensor x(u.shape(), u.data(), true);
    Tensor d = euclidean_distance(x, u);
    Gradients g = tape.backward(d);
    const Tensor& gx = g.at(x);
    CHECK(gx[0] == 0.0);
    CHECK(gx[1] == 0.0);
  }

  Rng rng(23);
  Tensor v = random_vector(6, rng);
  Tensor p = random_vector(6, rng);
  const double err = grad_check(
      [&v](const Tensor& x) { return euclidean_distance(x, v); }, p, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax cross entropy values") {
  Tensor uniform = Tensor::from_vector({0.5, 0.5, 0.5, 0.5});
  CHECK(softmax_cross_entropy(uniform, 2).value() ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));

  Tensor confident = Tensor::from_vector({40.0, 0.0, 0.0});
  CHECK(softmax_cross_entropy(confident, 0).value() < 1e-12);

  CHECK_THROWS_AS(softmax_cross_entropy(uniform, 4), IndexError);
  CHECK_THROWS_AS(softmax_cross_entropy(uniform, -1), IndexError);
}

TEST_CASE("softmax cross entropy gradient is softmax minus onehot") {
  Rng rng(31);
  Tensor logits = random_vector(5, rng);
  const int label = 3;
  {
    Tape tape;
    Tensor x(logits.shape(), logits.data(), true);
    Tensor loss = softmax_cross_entropy(x, label);
    Gradients g = tape.backward(loss);
    const Tensor& gx = g.at(x);
    const std::vector<double> probs = softmax_values(logits.data());
    for (int i = 0; i < 5; ++i) {
      const double expected = probs[static_cast<std::size_t>(i)] -
                              (i == label ? 1.0 : 0.0);
      CHECK(gx[i] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  const double err = grad_check(
      [label](const Tensor& x) { return softmax_cross_entropy(x, label); },
      logits, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax cross entropy shift invariance") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_vector(6, rng);
    const double c = rng.uniform(-50.0, 50.0);
    const double base = softmax_cross_entropy(logits, 1).value();
    const double shifted =
        softmax_cross_entropy(add_scalar(logits, c), 1).value();
    CHECK(shifted == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("backward basics") {
  Rng rng(41);
  Tensor x = random_vector(7, rng);

  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Gradients g = tape.backward(sum(v));
    const Tensor& gv = g.at(v);
    for (int i = 0; i < 7; ++i) CHECK(gv[i] == 1.0);
  }
  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Gradients g = tape.backward(dot(v, v));  // ||x||^2 -> 2x
    const Tensor& gv = g.at(v);
    for (int i = 0; i < 7; ++i) {
      CHECK(gv[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-12));
    }
  }
  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Tensor nonscalar = add(v, v);
    CHECK_THROWS_AS(tape.backward(nonscalar), ContractError);
  }
}

TEST_CASE("gradients are absent for non-participating tensors") {
  Tape tape;
  Tensor a = Tensor::from_vector({1, 2, 3});
  a.set_requires_grad(true);
  Tensor bystander = Tensor::from_vector({4, 5, 6});
  bystander.set_requires_grad(true);
  Tensor constant = Tensor::from_vector({7, 8, 9});

  Tensor loss = sum(add(a, constant));
  Gradients g = tape.backward(loss);
  CHECK(g.contains(a));
  CHECK_FALSE(g.contains(bystander));
  CHECK(g.find(bystander) == nullptr);
}

TEST_CASE("backward linearity over a sum of losses") {
  Rng rng(43);
  Tensor x = random_vector(5, rng);
  Tensor v1 = Tensor::from_vector({1, -1, 2, 0.5, -0.25});

  std::vector<double> combined(5), separate(5, 0.0);
  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Tensor loss = add(dot(v, v1), sum(relu(v)));
    Gradients g = tape.backward(loss);
    combined = g.at(v).data();
  }
  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Gradients g = tape.backward(dot(v, v1));
    for (int i = 0; i < 5; ++i) separate[static_cast<std::size_t>(i)] += g.at(v)[i];
  }
  {
    Tape tape;
    Tensor v(x.shape(), x.data(), true);
    Gradients g = tape.backward(sum(relu(v)));
    for (int i = 0; i < 5; ++i) separate[static_cast<std::size_t>(i)] += g.at(v)[i];
  }
  for (int i = 0; i < 5; ++i) {
    CHECK(combined[static_cast<std::size_t>(i)] ==
          doctest::Approx(separate[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("grad_check contract") {
  Tensor p = Tensor::from_vector({1.0, 2.0});
  CHECK(grad_check([](const Tensor& t) { return sum(t); }, p, 1e-5) < 1e-12);
  CHECK_THROWS_AS(
      grad_check([](const Tensor& t) { return sum(t); }, p, 0.5),
      ContractError);
  CHECK_THROWS_AS(
      grad_check([](const Tensor& t) { return add(t, t); }, p, 1e-5),
      ContractError);
}

TEST_CASE("grad_check self-consistency for fused ops") {
  Rng rng(47);
  Tensor fixed = random_vector(6, rng, 0.5, 1.5);
  Tensor p = random_vector(6, rng, 0.5, 1.5);
  CHECK(grad_check(
            [&fixed](const Tensor& u) { return cosine_similarity(u, fixed); },
            p, 1e-5) < 1e-6);
  Tensor logits = random_vector(5, rng);
  CHECK(grad_check(
            [](const Tensor& l) { return softmax_cross_entropy(l, 2); },
            logits, 1e-5) < 1e-6);
}

TEST_CASE("every differentiable op passes grad_check at 10 seeded points") {
  Rng rng(20260810);
  for (int point = 0; point < 10; ++point) {
    Tensor v = random_vector(6, rng, 0.3, 2.0);  // positive: away from kinks
    Tensor other = random_vector(6, rng, 0.3, 2.0);
    Tensor m = Tensor::randn({4, 6}, rng, 1.0);

    CHECK(grad_check([&other](const Tensor& t) { return sum(add(t, other)); },
                     v, 1e-5) < 1e-4);
    CHECK(grad_check([&other](const Tensor& t) { return sum(sub(t, other)); },
                     v, 1e-5) < 1e-4);
    CHECK(grad_check([](const Tensor& t) { return sum(scale(t, -1.7)); }, v,
                     1e-5) < 1e-4);
    CHECK(grad_check([](const Tensor& t) { return sum(relu(t)); }, v, 1e-5) <
          1e-4);
    CHECK(grad_check([&other](const Tensor& t) { return dot(t, other); }, v,
                     1e-5) < 1e-4);
    CHECK(grad_check([&m](const Tensor& t) { return sum(matmul(m, t)); }, v,
                     1e-5) < 1e-4);
    CHECK(grad_check(
              [&other](const Tensor& t) {
                const Tensor parts[] = {t, other};
                return sum(l2_normalize(concat(parts)));
              },
              v, 1e-5) < 1e-4);
    CHECK(grad_check(
              [&other](const Tensor& t) { return cosine_similarity(t, other); },
              v, 1e-5) < 1e-4);
    CHECK(grad_check(
              [&other](const Tensor& t) { return euclidean_distance(t, other); },
              v, 1e-5) < 1e-4);
    CHECK(grad_check(
              [](const Tensor& t) { return softmax_cross_entropy(t, 1); }, v,
              1e-5) < 1e-4);
  }
}

TEST_CASE("detach stops gradient flow") {
  Tape tape;
  Tensor v = Tensor::from_vector({1.0, 2.0});
  v.set_requires_grad(true);
  Tensor loss = sum(add(detach(scale(v, 3.0)), v));
  Gradients g = tape.backward(loss);
  const Tensor& gv = g.at(v);
  CHECK(gv[0] == 1.0);  // only the non-detached path contributes
  CHECK(gv[1] == 1.0);
}

TEST_CASE("ops reject non-finite results") {
  Tensor big = Tensor::from_vector({1e308, 1e308});
  CHECK_THROWS_AS(add(big, big), NumericError);
  CHECK_THROWS_AS(scale(big, 10.0), NumericError);
}

TEST_CASE("stale tape handles re-register as fresh leaves") {
  Tensor v = Tensor::from_vector({1.0, -2.0});
  v.set_requires_grad(true);
  for (int round = 0; round < 2; ++round) {
    Tape tape;
    Gradients g = tape.backward(dot(v, v));
    const Tensor& gv = g.at(v);
    CHECK(gv[0] == doctest::Approx(2.0 * v[0]));
    CHECK(gv[1] == doctest::Approx(2.0 * v[1]));
  }
}
