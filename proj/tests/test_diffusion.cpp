#include <doctest.h>

#include <cmath>

#include "dcm/diffusion.hpp"
#include "dcm/scm.hpp"

using namespace dcm;

namespace {

// epsilon-free model: zero weights and biases everywhere
DiffusionNodeModel zero_model(int dim, int parent_dim, int T) {
  Rng rng(0);
  DiffusionNodeModel m = make_node_model(0, dim, parent_dim, make_schedule(T), {8}, rng);
  for (auto& w : m.net.weights) w.fill(0.0);
  for (auto& b : m.net.biases) std::fill(b.begin(), b.end(), 0.0);
  return m;
}

// single linear layer, so the noise prediction is affine in [x, parents, t/T]
DiffusionNodeModel affine_model(int dim, int parent_dim, int T, double x_slope_scale, Rng& rng) {
  DiffusionNodeModel m;
  m.node = 0;
  m.dim = dim;
  m.parent_dim = parent_dim;
  m.schedule = make_schedule(T);
  m.net = make_mlp({dim + parent_dim + 1, dim}, rng);
  Matrix& w = m.net.weights[0];
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) w(i, j) = rng.uniform(-1.0, 1.0) * x_slope_scale;
    for (int i = 0; i < parent_dim; ++i) w(dim + i, j) = rng.uniform(-1.0, 1.0);
    w(dim + parent_dim, j) = rng.uniform(-1.0, 1.0) * x_slope_scale;  // time slope
    m.net.biases[0][j] = rng.uniform(-1.0, 1.0);
  }
  return m;
}

}  // namespace

TEST_CASE("make_schedule") {
  SUBCASE("paper endpoints") {
    const NoiseSchedule s = make_schedule(100, 1e-4, 0.1);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(100) == 0.1);
    for (int t = 2; t <= 100; ++t) CHECK(s.beta(t) >= s.beta(t - 1));
    for (int t = 1; t <= 100; ++t) CHECK(s.alpha(t) < s.alpha(t - 1));
    CHECK(s.alpha(100) > 0.0);
    CHECK(s.alpha(100) < 1.0);
  }
  SUBCASE("T = 1 degenerates to beta_min") {
    const NoiseSchedule s = make_schedule(1, 0.1, 0.5);
    CHECK(s.beta(1) == 0.1);
    CHECK(s.alpha(1) == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("alpha matches an independent product") {
    const NoiseSchedule s = make_schedule(100);
    for (int t : {1, 17, 50, 100}) {
      long double prod = 1.0L;
      for (int i = 1; i <= t; ++i)
        prod *= 1.0L - static_cast<long double>(s.beta(i));
      CHECK(s.alpha(t) == doctest::Approx(static_cast<double>(prod)).epsilon(1e-12));
    }
  }
  SUBCASE("invalid ranges rejected") {
    CHECK_THROWS_AS(make_schedule(0), Error);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.1), Error);
    CHECK_THROWS_AS(make_schedule(10, 0.2, 0.1), Error);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), Error);
  }
}

TEST_CASE("encode with a zero noise predictor telescopes") {
  SUBCASE("z = sqrt(alpha_T) x") {
    const DiffusionNodeModel m = zero_model(1, 1, 100);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform(-3.0, 3.0);
      const Vector z = encode(m, {x}, {0.5});
      CHECK(z[0] ==
            doctest::Approx(std::sqrt(m.schedule.alpha(100)) * x).epsilon(1e-12));
    }
  }
  SUBCASE("single step arithmetic") {
    const DiffusionNodeModel m = zero_model(1, 0, 1);
    // beta_1 = 1e-4 by default; build a custom schedule with beta = 0.1
    DiffusionNodeModel m2 = m;
    m2.schedule = make_schedule(1, 0.1, 0.1);
    const Vector z = encode(m2, {2.0}, {});
    CHECK(z[0] == doctest::Approx(std::sqrt(0.9) * 2.0).epsilon(1e-12));
    CHECK(z[0] == doctest::Approx(1.897367).epsilon(1e-6));
  }
  SUBCASE("encode is deterministic") {
    Rng rng(2);
    DiffusionNodeModel m = make_node_model(0, 2, 1, make_schedule(50), {16, 16}, rng);
    const Vector a = encode(m, {0.4, -1.0}, {0.2});
    const Vector b = encode(m, {0.4, -1.0}, {0.2});
    CHECK(a == b);
  }
}

TEST_CASE("decode inverts encode") {
  SUBCASE("zero predictor: exact round trip") {
    const DiffusionNodeModel m = zero_model(1, 1, 100);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const double x = rng.uniform(-3.0, 3.0), pa = rng.normal();
      const Vector back = decode(m, encode(m, {x}, {pa}), {pa});
      CHECK(std::fabs(back[0] - x) <= 1e-9);
    }
  }
  SUBCASE("affine predictor (near-zero state slope): 1e-6 round trip") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      const DiffusionNodeModel m = affine_model(2, 2, 100, 1e-6, rng);
      for (int i = 0; i < 20; ++i) {
        const Vector x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const Vector pa{rng.normal(), rng.normal()};
        const Vector back = decode(m, encode(m, x, pa), pa);
        for (int j = 0; j < 2; ++j) CHECK(std::fabs(back[j] - x[j]) <= 1e-6);
      }
    }
  }
  SUBCASE("state slope grows the round-trip discretization error linearly") {
    // The two recursions evaluate the predictor at different (point, time)
    // pairs, so a state-dependent predictor leaves an O(slope) residual.
    Rng rng(5);
    double err_small = 0.0, err_large = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Rng ra = rng.substream("a", trial);
      Rng rb = ra;
      const DiffusionNodeModel small = affine_model(1, 1, 100, 1e-4, ra);
      const DiffusionNodeModel large = affine_model(1, 1, 100, 1e-2, rb);
      for (int i = 0; i < 20; ++i) {
        const Vector x{rng.uniform(-2.0, 2.0)};
        const Vector pa{rng.normal()};
        err_small = std::max(err_small,
                             std::fabs(decode(small, encode(small, x, pa), pa)[0] - x[0]));
        err_large = std::max(err_large,
                             std::fabs(decode(large, encode(large, x, pa), pa)[0] - x[0]));
      }
    }
    CHECK(err_small < 1e-4);
    CHECK(err_large > err_small);
    CHECK(err_large < 0.3);
  }
}

TEST_CASE("training determinism on a tiny configuration") {
  Rng data_rng(6);
  Matrix xs(100, 1), pas(100, 1);
  for (int i = 0; i < 100; ++i) {
    pas(i, 0) = data_rng.normal();
    xs(i, 0) = std::sin(pas(i, 0)) + 0.1 * data_rng.normal();
  }
  TrainOptions opt;
  opt.epochs = 3;
  opt.hidden = {16};
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    Rng init = rng.substream("init");
    DiffusionNodeModel m = make_node_model(1, 1, 1, make_schedule(8), opt.hidden, init);
    Rng train = rng.substream("train");
    train_node(m, xs, pas, opt, train);
    return m;
  };
  const DiffusionNodeModel a = run(77), b = run(77);
  for (int l = 0; l < a.net.num_layers(); ++l) CHECK(a.net.weights[l] == b.net.weights[l]);
}

TEST_CASE("training aborts on a non-finite loss") {
  Rng data_rng(8);
  Matrix xs(64, 1), pas(64, 0);
  for (int i = 0; i < 64; ++i) xs(i, 0) = data_rng.normal();
  xs(13, 0) = std::nan("");
  TrainOptions opt;
  opt.epochs = 2;
  opt.hidden = {16};
  Rng rng(9);
  DiffusionNodeModel m = make_node_model(0, 1, 0, make_schedule(8), opt.hidden, rng);
  CHECK_THROWS_WITH_AS(train_node(m, xs, pas, opt, rng),
                       doctest::Contains("non-finite loss"), Error);
}

TEST_CASE("model json round trip") {
  Rng rng(10);
  DiffusionNodeModel m = make_node_model(2, 2, 3, make_schedule(25), {16, 16}, rng);
  const DiffusionNodeModel back = node_model_from_json(node_model_to_json(m));
  const Vector x{0.3, -0.8}, pa{0.1, 0.2, -0.5};
  CHECK(encode(m, x, pa) == encode(back, x, pa));
  CHECK(decode(m, x, pa) == decode(back, x, pa));
}

// Trains the chain NLIN middle node at the benchmark configuration. Slow.
TEST_CASE("trained node: loss halves, reconstruction is tight, latents are white") {
  Rng scm_rng(20);
  const GroundTruthScm scm = fixed_scm(GraphKind::Chain, SemKind::Nlin, scm_rng);
  Rng data_rng(21);
  const TracedMatrix train = scm.sample_observational(2000, data_rng);
  const TracedMatrix held = scm.sample_observational(1000, data_rng);

  TrainOptions opt;
  opt.epochs = 200;
  Rng init(22);
  DiffusionNodeModel m = make_node_model(1, 1, 1, make_schedule(100), opt.hidden, init);
  Rng train_rng(23);
  const std::vector<double> losses =
      train_node(m, train.values.cols_slice(1, 1), train.values.cols_slice(0, 1), opt, train_rng);

  CHECK(losses.back() <= 0.5 * losses.front());

  const Matrix x = held.values.cols_slice(1, 1);
  const Matrix pa = held.values.cols_slice(0, 1);
  const Matrix z = encode_batch(m, x, pa);
  const Matrix back = decode_batch(m, z, pa);
  double se = 0.0;
  for (int i = 0; i < x.rows(); ++i) se += (back(i, 0) - x(i, 0)) * (back(i, 0) - x(i, 0));
  const double rmse = std::sqrt(se / x.rows());
  CHECK(rmse < 0.05);

  double mean = 0.0, var = 0.0;
  for (int i = 0; i < z.rows(); ++i) mean += z(i, 0);
  mean /= z.rows();
  for (int i = 0; i < z.rows(); ++i) var += (z(i, 0) - mean) * (z(i, 0) - mean);
  var /= z.rows() - 1;
  CHECK(mean > -0.3);
  CHECK(mean < 0.3);
  CHECK(var > 0.6);
  CHECK(var < 1.4);
}
