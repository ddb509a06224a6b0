#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dcm/causal_model.hpp"

using namespace dcm;

namespace {

DcmHyperparams tiny_hyper() {
  DcmHyperparams hp;
  hp.T = 8;
  hp.train.epochs = 4;
  hp.train.batch_size = 32;
  hp.train.learning_rate = 1e-3;
  hp.train.hidden = {16};
  return hp;
}

AnmOptions tiny_anm() {
  AnmOptions opt;
  opt.mlp.hidden = {16, 16};
  opt.mlp.epochs = 30;
  return opt;
}

DcmModel zero_eps_dcm(const CausalGraph& graph, const Matrix& dataset, int T = 50) {
  const NoiseSchedule schedule = make_schedule(T);
  std::map<int, DiffusionNodeModel> models;
  for (int node : graph.non_roots()) {
    int parent_dim = 0;
    for (int p : graph.parents(node)) parent_dim += graph.node_dim(p);
    Rng rng(0);
    DiffusionNodeModel m =
        make_node_model(node, graph.node_dim(node), parent_dim, schedule, {8}, rng);
    for (auto& w : m.net.weights) w.fill(0.0);
    for (auto& b : m.net.biases) std::fill(b.begin(), b.end(), 0.0);
    models.emplace(node, std::move(m));
  }
  std::map<int, Matrix> roots;
  for (int node : graph.roots())
    roots.emplace(node, dataset.cols_slice(graph.col_offset(node), graph.node_dim(node)));
  return DcmModel(graph, std::move(models), std::move(roots), tiny_hyper());
}

// exact regressor for X2 = 2 X1: used to exercise the perfect-abduction limit
class ExactDoubleRegressor final : public Regressor {
 public:
  void fit(const Matrix&, const Matrix&) override {}
  Matrix predict(const Matrix& X) const override {
    Matrix out(X.rows(), 1);
    for (int i = 0; i < X.rows(); ++i) out(i, 0) = 2.0 * X(i, 0);
    return out;
  }
  std::string name() const override { return "exact"; }
  nlohmann::json to_json() const override { throw Error("test regressor"); }
  std::unique_ptr<Regressor> clone() const override {
    return std::make_unique<ExactDoubleRegressor>();
  }
};

GroundTruthScm linear_chain_2x() {
  CausalGraph g({1, 1}, {{}, {0}});
  std::vector<StructuralEquation> eqs;
  eqs.emplace_back(0, std::make_unique<IdentityMechanism>(1));
  eqs.emplace_back(1, std::make_unique<LinearMechanism>(Matrix(1, 1, 2.0), Vector{0.0},
                                                        Vector{1.0}));
  return GroundTruthScm(std::move(g), std::move(eqs));
}

}  // namespace

TEST_CASE("paper-default hyperparameters") {
  const DcmHyperparams hp;
  CHECK(hp.T == 100);
  CHECK(hp.beta_min == 1e-4);
  CHECK(hp.beta_max == 0.1);
  CHECK(hp.train.epochs == 500);
  CHECK(hp.train.batch_size == 64);
  CHECK(hp.train.learning_rate == 1e-4);
  CHECK(hp.train.hidden == std::vector<int>{128, 256, 256});
}

TEST_CASE("fit_dcm basics") {
  Rng scm_rng(1);
  const GroundTruthScm scm = fixed_scm(GraphKind::Chain, SemKind::Nlin, scm_rng);
  Rng data_rng(2);
  const Matrix data = scm.sample_observational(200, data_rng).values;

  SUBCASE("chain trains exactly the two non-root nodes") {
    Rng rng(3);
    const DcmModel model = fit_dcm(data, scm.graph(), tiny_hyper(), rng);
    CHECK_THROWS_AS(model.node_model(0), Error);
    CHECK(model.node_model(1).dim == 1);
    CHECK(model.node_model(2).parent_dim == 1);
    CHECK(model.root_empiricals().at(0).rows() == 200);
    CHECK(model.loss_traces().at(1).size() == 4);
  }
  SUBCASE("identical seeds give identical models") {
    Rng a(7), b(7);
    const DcmModel m1 = fit_dcm(data, scm.graph(), tiny_hyper(), a);
    const DcmModel m2 = fit_dcm(data, scm.graph(), tiny_hyper(), b);
    for (int node : {1, 2})
      for (int l = 0; l < m1.node_model(node).net.num_layers(); ++l)
        CHECK(m1.node_model(node).net.weights[l] == m2.node_model(node).net.weights[l]);
  }
}

TEST_CASE("dcm sampling contract") {
  Rng scm_rng(1);
  const GroundTruthScm scm = fixed_scm(GraphKind::Chain, SemKind::Nlin, scm_rng);
  Rng data_rng(2);
  const Matrix data = scm.sample_observational(150, data_rng).values;
  Rng fit_rng(3);
  const DcmModel model = fit_dcm(data, scm.graph(), tiny_hyper(), fit_rng);

  SUBCASE("intervened column is exactly the assigned value") {
    Rng rng(4);
    const Matrix s = model.sample({{1, {0.25}}}, 50, rng);
    for (int r = 0; r < 50; ++r) CHECK(s(r, 1) == 0.25);
  }
  SUBCASE("root draws appear verbatim in the training column") {
    Rng rng(5);
    const Matrix s = model.sample({}, 80, rng);
    std::set<double> pool;
    for (int r = 0; r < 150; ++r) pool.insert(data(r, 0));
    for (int r = 0; r < 80; ++r) CHECK(pool.count(s(r, 0)) == 1);
  }
  SUBCASE("sampling is deterministic given the seed") {
    Rng a(6), b(6);
    CHECK(model.sample({}, 20, a) == model.sample({}, 20, b));
  }
  SUBCASE("downstream interventions do not disturb upstream draws") {
    Rng a(8), b(8);
    const Matrix obs = model.sample({}, 30, a);
    const Matrix cut = model.sample({{2, {9.0}}}, 30, b);
    for (int r = 0; r < 30; ++r) {
      CHECK(obs(r, 0) == cut(r, 0));
      CHECK(obs(r, 1) == cut(r, 1));
      CHECK(cut(r, 2) == 9.0);
    }
  }
  SUBCASE("intervention validation") {
    Rng rng(9);
    CHECK_THROWS_AS(model.sample({{1, {0.1, 0.2}}}, 5, rng), Error);
    CHECK_THROWS_AS(model.sample({{7, {0.1}}}, 5, rng), Error);
  }
}

TEST_CASE("dcm counterfactuals") {
  Rng scm_rng(1);
  const GroundTruthScm scm = fixed_scm(GraphKind::Chain, SemKind::Nlin, scm_rng);
  Rng data_rng(2);
  const Matrix data = scm.sample_observational(100, data_rng).values;
  const DcmModel model = zero_eps_dcm(scm.graph(), data);

  SUBCASE("null intervention echoes the factual exactly") {
    const Matrix cf = model.counterfactual(data, {});
    CHECK(cf == data);
  }
  SUBCASE("sink intervention changes only the sink") {
    const Matrix cf = model.counterfactual(data, {{2, {1.5}}});
    for (int r = 0; r < data.rows(); ++r) {
      CHECK(cf(r, 0) == data(r, 0));
      CHECK(cf(r, 1) == data(r, 1));
      CHECK(cf(r, 2) == 1.5);
    }
  }
  SUBCASE("non-descendants keep factual values under do(X2)") {
    const Matrix cf = model.counterfactual(data, {{1, {0.0}}});
    for (int r = 0; r < data.rows(); ++r) CHECK(cf(r, 0) == data(r, 0));
  }
  SUBCASE("zero predictor: re-intervening each root with its factual value round-trips") {
    // descendants go through encode/decode, which invert exactly here
    Matrix cf(data.rows(), data.cols());
    for (int r = 0; r < data.rows(); ++r) {
      const Matrix row = data.select_rows({r});
      const Matrix out = model.counterfactual(row, {{0, {data(r, 0)}}});
      cf.set_row(r, out.row_vec(0));
    }
    for (int r = 0; r < data.rows(); ++r)
      for (int c = 0; c < 3; ++c) CHECK(std::fabs(cf(r, c) - data(r, c)) <= 1e-9);
  }
  SUBCASE("partial factual rows are rejected") {
    CHECK_THROWS_AS(model.counterfactual(data.cols_slice(0, 2), {{0, {1.0}}}), Error);
  }
}

TEST_CASE("fit_anm on linear data selects the linear model") {
  const GroundTruthScm scm = linear_chain_2x();
  Rng data_rng(11);
  const TracedMatrix train = scm.sample_observational(800, data_rng);

  Rng fit_rng(12);
  const AnmModel model = fit_anm(train.values, scm.graph(), fit_rng, tiny_anm());

  CHECK(model.selection(1).chosen == "ridge");
  CHECK(model.residuals(1).rows() == 800);

  // in-sample R^2 of the selected regressor
  const Matrix pred = model.regressor(1).predict(train.values.cols_slice(0, 1));
  double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
  for (int r = 0; r < 800; ++r) mean += train.values(r, 1);
  mean /= 800;
  for (int r = 0; r < 800; ++r) {
    ss_res += std::pow(train.values(r, 1) - pred(r, 0), 2);
    ss_tot += std::pow(train.values(r, 1) - mean, 2);
  }
  CHECK(1.0 - ss_res / ss_tot > 0.9);

  // residuals recover the true exogenous noise
  double num = 0.0, ra = 0.0, rb = 0.0, mr = 0.0, mu = 0.0;
  for (int r = 0; r < 800; ++r) {
    mr += model.residuals(1)(r, 0);
    mu += train.noises(r, 1);
  }
  mr /= 800;
  mu /= 800;
  for (int r = 0; r < 800; ++r) {
    const double a = model.residuals(1)(r, 0) - mr;
    const double b = train.noises(r, 1) - mu;
    num += a * b;
    ra += a * a;
    rb += b * b;
  }
  CHECK(num / std::sqrt(ra * rb) > 0.95);
}

TEST_CASE("linear-model selection is stable across seeds") {
  const GroundTruthScm scm = linear_chain_2x();
  int ridge_wins = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng data_rng(100 + seed);
    const Matrix data = scm.sample_observational(500, data_rng).values;
    Rng fit_rng(200 + seed);
    const AnmModel model = fit_anm(data, scm.graph(), fit_rng, tiny_anm());
    if (model.selection(1).chosen == "ridge") ++ridge_wins;
  }
  CHECK(ridge_wins >= 8);
}

TEST_CASE("anm sampling and counterfactuals") {
  const GroundTruthScm scm = linear_chain_2x();
  Rng data_rng(21);
  const Matrix data = scm.sample_observational(2000, data_rng).values;
  Rng fit_rng(22);
  const AnmModel model = fit_anm(data, scm.graph(), fit_rng, tiny_anm());

  SUBCASE("interventional mean matches the closed form") {
    Rng rng(23);
    const Matrix s = model.sample({{0, {1.5}}}, 4000, rng);
    for (int r = 0; r < 10; ++r) CHECK(s(r, 0) == 1.5);
    double mean = 0.0;
    for (int r = 0; r < 4000; ++r) mean += s(r, 1);
    mean /= 4000;
    CHECK(std::fabs(mean - 3.0) < 4.0 * 1.0 / std::sqrt(4000.0));
  }
  SUBCASE("roots resampled from the training empirical") {
    Rng rng(24);
    const Matrix s = model.sample({}, 60, rng);
    std::set<double> pool;
    for (int r = 0; r < data.rows(); ++r) pool.insert(data(r, 0));
    for (int r = 0; r < 60; ++r) CHECK(pool.count(s(r, 0)) == 1);
  }
  SUBCASE("null intervention echoes the factual") {
    const Matrix page = data.select_rows({0, 1, 2});
    CHECK(model.counterfactual(page, {}) == page);
  }
}

TEST_CASE("anm with the exact mechanism reproduces the oracle counterfactual") {
  const GroundTruthScm scm = linear_chain_2x();
  Rng data_rng(31);
  const TracedMatrix train = scm.sample_observational(200, data_rng);

  std::map<int, std::unique_ptr<Regressor>> regs;
  regs.emplace(1, std::make_unique<ExactDoubleRegressor>());
  Matrix resid(200, 1);
  for (int r = 0; r < 200; ++r) resid(r, 0) = train.values(r, 1) - 2.0 * train.values(r, 0);
  std::map<int, Matrix> resids;
  resids.emplace(1, std::move(resid));
  std::map<int, Matrix> roots;
  roots.emplace(0, train.values.cols_slice(0, 1));
  const AnmModel model(scm.graph(), std::move(regs), std::move(resids), std::move(roots));

  SUBCASE("textbook example: factual (1, 2.5), do(X1:=0) gives 0.5") {
    Matrix f(1, 2);
    f(0, 0) = 1.0;
    f(0, 1) = 2.5;
    const Matrix cf = model.counterfactual(f, {{0, {0.0}}});
    CHECK(cf(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("equals the oracle on sampled factuals") {
    const Matrix est = model.counterfactual(train.values, {{0, {0.8}}});
    const Matrix truth = scm.true_counterfactual(train, {{0, {0.8}}});
    for (int r = 0; r < 200; ++r) CHECK(est(r, 1) == doctest::Approx(truth(r, 1)).epsilon(1e-12));
  }
}

TEST_CASE("oracle model behind the query interface") {
  SUBCASE("invertible mechanisms allow value-only counterfactuals") {
    auto scm = std::make_shared<GroundTruthScm>(linear_chain_2x());
    const OracleModel oracle(scm);
    Rng rng(41);
    const TracedMatrix s = scm->sample_observational(50, rng);
    const Matrix via_values = oracle.counterfactual(s.values, {{0, {1.0}}});
    const Matrix via_traces = oracle.counterfactual_traced(s, {{0, {1.0}}});
    for (int r = 0; r < 50; ++r)
      for (int c = 0; c < 2; ++c)
        CHECK(via_values(r, c) == doctest::Approx(via_traces(r, c)).epsilon(1e-12));
  }
  SUBCASE("nonadditive mechanisms require traces") {
    Rng build(42);
    auto scm = std::make_shared<GroundTruthScm>(fixed_scm(GraphKind::Chain, SemKind::Nadd, build));
    const OracleModel oracle(scm);
    Rng rng(43);
    const TracedMatrix s = scm->sample_observational(25, rng);
    CHECK_THROWS_AS(oracle.counterfactual(s.values, {{0, {1.0}}}), Error);
    const Matrix cf = oracle.counterfactual_traced(s, {{0, {1.0}}});
    CHECK(cf.rows() == 25);
    for (int r = 0; r < 25; ++r) CHECK(cf(r, 0) == 1.0);
  }
}
