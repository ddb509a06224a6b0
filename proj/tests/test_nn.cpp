#include <doctest.h>

#include <cmath>

#include "dcm/nn.hpp"

using namespace dcm;

namespace {

// Scaled difference used for all gradient comparisons: relative for large
// entries, absolute for entries near zero.
double grad_error(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(a) + std::fabs(b)); }

// Central finite differences of L(theta) = sum(output .* upstream).
double fd_loss(const Mlp& net, const Vector& input, const Vector& upstream) {
  const Vector out = mlp_apply(net, input);
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) loss += out[i] * upstream[i];
  return loss;
}

double max_grad_error_vs_fd(Mlp net, const Vector& input, const Vector& upstream) {
  const MlpGrads g = mlp_grad(net, input, upstream);
  const double h = 1e-4;
  double worst = 0.0;
  for (int l = 0; l < net.num_layers(); ++l) {
    for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
      double& p = net.weights[l].data()[i];
      const double saved = p;
      p = saved + h;
      const double up = fd_loss(net, input, upstream);
      p = saved - h;
      const double dn = fd_loss(net, input, upstream);
      p = saved;
      worst = std::max(worst, grad_error(g.d_weights[l].data()[i], (up - dn) / (2 * h)));
    }
    for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
      double& p = net.biases[l][i];
      const double saved = p;
      p = saved + h;
      const double up = fd_loss(net, input, upstream);
      p = saved - h;
      const double dn = fd_loss(net, input, upstream);
      p = saved;
      worst = std::max(worst, grad_error(g.d_biases[l][i], (up - dn) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("silu values") {
  CHECK(silu({0.0})[0] == 0.0);
  CHECK(silu({10.0})[0] == doctest::Approx(9.999546).epsilon(1e-6));
  CHECK(silu({-1.0})[0] == doctest::Approx(-0.268941).epsilon(1e-5));
}

TEST_CASE("mlp_apply on fixed nets") {
  SUBCASE("zero weights give zero output") {
    Rng rng(1);
    Mlp net = make_mlp({3, 4, 2}, rng);
    for (auto& w : net.weights) w.fill(0.0);
    const Vector out = mlp_apply(net, {1.0, -2.0, 0.5});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
  }
  SUBCASE("identity linear layer") {
    Rng rng(1);
    Mlp net = make_mlp({3, 3}, rng);
    net.weights[0].fill(0.0);
    for (int i = 0; i < 3; ++i) net.weights[0](i, i) = 1.0;
    const Vector in{0.3, -1.7, 2.0};
    CHECK(mlp_apply(net, in) == in);
  }
  SUBCASE("1-2-1 net against a hand computation") {
    Rng rng(1);
    Mlp net = make_mlp({1, 2, 1}, rng);
    net.weights[0](0, 0) = 0.7;
    net.weights[0](0, 1) = -1.2;
    net.biases[0] = {0.1, 0.4};
    net.weights[1](0, 0) = 2.0;
    net.weights[1](1, 0) = -0.5;
    net.biases[1] = {0.25};
    const double x = 0.9;
    auto s = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double z1 = 0.7 * x + 0.1, z2 = -1.2 * x + 0.4;
    const double expected = 2.0 * (z1 * s(z1)) - 0.5 * (z2 * s(z2)) + 0.25;
    CHECK(mlp_apply(net, {x})[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("mlp_grad matches closed forms and finite differences") {
  SUBCASE("linear layer: dL/dW = input outer upstream") {
    Rng rng(2);
    Mlp net = make_mlp({3, 2}, rng);
    const Vector in{0.5, -1.0, 2.0};
    const Vector up{1.5, -0.5};
    const MlpGrads g = mlp_grad(net, in, up);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(g.d_weights[0](i, j) == doctest::Approx(in[i] * up[j]).epsilon(1e-14));
  }
  SUBCASE("zero upstream gives zero gradients") {
    Rng rng(3);
    Mlp net = make_mlp({2, 5, 2}, rng);
    const MlpGrads g = mlp_grad(net, {0.3, 0.7}, {0.0, 0.0});
    for (const auto& w : g.d_weights)
      for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.data()[i] == 0.0);
    for (std::size_t i = 0; i < g.d_input.size(); ++i) CHECK(g.d_input.data()[i] == 0.0);
  }
  SUBCASE("random 4-8-8-2 net vs central differences") {
    for (int trial = 0; trial < 5; ++trial) {
      Rng rng(100 + trial);
      Mlp net = make_mlp({4, 8, 8, 2}, rng);
      Vector in(4), up(2);
      for (auto& v : in) v = rng.uniform(-2.0, 2.0);
      for (auto& v : up) v = rng.uniform(-1.0, 1.0);
      CHECK(max_grad_error_vs_fd(net, in, up) < 1e-4);
    }
  }
}

TEST_CASE("adam behaviour") {
  Rng rng(4);
  Mlp net = make_mlp({1, 1}, rng);
  net.weights[0](0, 0) = 0.5;
  net.biases[0][0] = -0.25;

  SUBCASE("zero gradient at step one leaves parameters unchanged") {
    AdamState st = make_adam_state(net, 1e-3);
    MlpGrads g;
    g.d_weights = {Matrix(1, 1, 0.0)};
    g.d_biases = {Vector{0.0}};
    Mlp before = net;
    adam_step(st, net, g);
    CHECK(net.weights[0](0, 0) == before.weights[0](0, 0));
    CHECK(net.biases[0][0] == before.biases[0][0]);
    CHECK(st.step_count == 1);
  }
  SUBCASE("first step magnitude is about the learning rate") {
    AdamState st = make_adam_state(net, 1e-3);
    MlpGrads g;
    g.d_weights = {Matrix(1, 1, 0.37)};
    g.d_biases = {Vector{-2.4}};
    const double w0 = net.weights[0](0, 0), b0 = net.biases[0][0];
    adam_step(st, net, g);
    CHECK(std::fabs(net.weights[0](0, 0) - w0) == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(std::fabs(net.biases[0][0] - b0) == doctest::Approx(1e-3).epsilon(1e-6));
  }
  SUBCASE("identical calls produce identical parameters") {
    Mlp a = net, b = net;
    AdamState sa = make_adam_state(a, 1e-3), sb = make_adam_state(b, 1e-3);
    MlpGrads g;
    g.d_weights = {Matrix(1, 1, 0.8)};
    g.d_biases = {Vector{0.1}};
    for (int i = 0; i < 10; ++i) {
      adam_step(sa, a, g);
      adam_step(sb, b, g);
    }
    CHECK(a.weights[0](0, 0) == b.weights[0](0, 0));
    CHECK(a.biases[0][0] == b.biases[0][0]);
  }
  SUBCASE("lr = 0 is the identity") {
    AdamState st = make_adam_state(net, 0.0);
    MlpGrads g;
    g.d_weights = {Matrix(1, 1, 3.0)};
    g.d_biases = {Vector{-1.0}};
    Mlp before = net;
    adam_step(st, net, g);
    CHECK(net.weights[0](0, 0) == before.weights[0](0, 0));
  }
  SUBCASE("NaN gradient is rejected") {
    AdamState st = make_adam_state(net, 1e-3);
    MlpGrads g;
    g.d_weights = {Matrix(1, 1, std::nan(""))};
    g.d_biases = {Vector{0.0}};
    CHECK_THROWS_AS(adam_step(st, net, g), Error);
  }
}

TEST_CASE("bounded inputs keep outputs finite") {
  Rng rng(5);
  Mlp net = make_mlp({2, 16, 16, 1}, rng);
  for (auto& w : net.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = 10.0 * (i % 2 ? 1 : -1);
  for (double x : {1e3, -1e3, 0.0}) {
    const Vector out = mlp_apply(net, {x, -x});
    CHECK(std::isfinite(out[0]));
  }
}
