#include "dcm/causal_model.hpp"

#include <algorithm>

#include "dcm/serialize.hpp"

namespace dcm {

namespace {

void check_factual(const CausalGraph& g, const Matrix& factual) {
  require(factual.cols() == g.total_dim(),
          "counterfactual: factual rows must carry every node (full observability); expected " +
              std::to_string(g.total_dim()) + " columns, got " + std::to_string(factual.cols()));
}

std::vector<bool> descendant_mask(const CausalGraph& g, const InterventionMap& iv) {
  std::vector<bool> affected(g.num_nodes(), false);
  for (const auto& [node, _] : iv)
    for (int d : g.descendants(node)) affected[d] = true;
  return affected;
}

Matrix slice_node(const CausalGraph& g, const Matrix& data, int node) {
  return data.cols_slice(g.col_offset(node), g.node_dim(node));
}

Matrix slice_parents(const CausalGraph& g, const Matrix& data, int node) {
  return data.select_cols(g.columns_of(g.parents(node)));
}

void write_node(const CausalGraph& g, Matrix& data, int node, const Matrix& values) {
  const int off = g.col_offset(node);
  for (int r = 0; r < data.rows(); ++r)
    for (int j = 0; j < values.cols(); ++j) data(r, off + j) = values(r, j);
}

}  // namespace

DcmModel::DcmModel(CausalGraph graph, std::map<int, DiffusionNodeModel> node_models,
                   std::map<int, Matrix> root_empiricals, DcmHyperparams hyper)
    : graph_(std::move(graph)),
      node_models_(std::move(node_models)),
      root_empiricals_(std::move(root_empiricals)),
      hyper_(std::move(hyper)) {
  for (int node : graph_.non_roots())
    require(node_models_.count(node), "DcmModel: missing node model for node " +
                                          std::to_string(node + 1));
  for (int node : graph_.roots()) {
    require(root_empiricals_.count(node) && root_empiricals_.at(node).rows() > 0,
            "DcmModel: missing root empiricals for node " + std::to_string(node + 1));
  }
}

const DiffusionNodeModel& DcmModel::node_model(int node) const {
  const auto it = node_models_.find(node);
  require(it != node_models_.end(), "DcmModel: no model for node " + std::to_string(node + 1));
  return it->second;
}

DcmModel fit_dcm(const Matrix& dataset, const CausalGraph& graph, const DcmHyperparams& hyper,
                 Rng& rng) {
  require(dataset.cols() == graph.total_dim(), "fit_dcm: dataset columns must cover all nodes");
  require(dataset.rows() >= 2, "fit_dcm: need training data");
  const NoiseSchedule schedule = make_schedule(hyper.T, hyper.beta_min, hyper.beta_max);

  std::map<int, DiffusionNodeModel> models;
  std::map<int, std::vector<double>> traces;
  for (int node : graph.non_roots()) {
    int parent_dim = 0;
    for (int p : graph.parents(node)) parent_dim += graph.node_dim(p);
    Rng init = rng.substream("dcm_init", node);
    DiffusionNodeModel model =
        make_node_model(node, graph.node_dim(node), parent_dim, schedule, hyper.train.hidden, init);
    Rng train = rng.substream("dcm_train", node);
    try {
      traces[node] = train_node(model, slice_node(graph, dataset, node),
                                slice_parents(graph, dataset, node), hyper.train, train);
    } catch (const Error& e) {
      throw Error("fit_dcm: node " + std::to_string(node + 1) + ": " + e.what());
    }
    models.emplace(node, std::move(model));
  }
  std::map<int, Matrix> roots;
  for (int node : graph.roots()) roots.emplace(node, slice_node(graph, dataset, node));
  DcmModel out(graph, std::move(models), std::move(roots), hyper);
  out.loss_traces_ = std::move(traces);
  return out;
}

Matrix DcmModel::sample(const InterventionMap& iv, int n, Rng& rng) const {
  require(n >= 1, "sample: n must be at least 1");
  for (const auto& [node, value] : iv) {
    require(node >= 0 && node < graph_.num_nodes(), "sample: invalid intervention node");
    require(static_cast<int>(value.size()) == graph_.node_dim(node),
            "sample: intervention dim mismatch at node " + std::to_string(node + 1));
  }
  Matrix out(n, graph_.total_dim());
  for (int node : graph_.topological_order()) {
    const auto it = iv.find(node);
    if (it != iv.end()) {
      const int off = graph_.col_offset(node);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < graph_.node_dim(node); ++j) out(r, off + j) = it->second[j];
    } else if (graph_.is_root(node)) {
      const Matrix& pool = root_empiricals_.at(node);
      const int off = graph_.col_offset(node);
      for (int r = 0; r < n; ++r) {
        const int pick = static_cast<int>(rng.uniform_int(0, pool.rows() - 1));
        for (int j = 0; j < pool.cols(); ++j) out(r, off + j) = pool(pick, j);
      }
    } else {
      const DiffusionNodeModel& model = node_models_.at(node);
      Matrix z(n, model.dim);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < model.dim; ++j) z(r, j) = rng.normal();
      write_node(graph_, out, node, decode_batch(model, z, slice_parents(graph_, out, node)));
    }
  }
  return out;
}

Matrix DcmModel::counterfactual(const Matrix& factual_values, const InterventionMap& iv) const {
  check_factual(graph_, factual_values);
  const std::vector<bool> affected = descendant_mask(graph_, iv);
  Matrix out = factual_values;
  for (int node : graph_.topological_order()) {
    const auto it = iv.find(node);
    if (it != iv.end()) {
      require(static_cast<int>(it->second.size()) == graph_.node_dim(node),
              "counterfactual: intervention dim mismatch at node " + std::to_string(node + 1));
      const int off = graph_.col_offset(node);
      for (int r = 0; r < out.rows(); ++r)
        for (int j = 0; j < graph_.node_dim(node); ++j) out(r, off + j) = it->second[j];
    } else if (affected[node]) {
      if (graph_.is_root(node)) continue;  // a root is never a descendant
      const DiffusionNodeModel& model = node_models_.at(node);
      // abduction on the factual values, prediction on the counterfactual parents
      const Matrix z = encode_batch(model, slice_node(graph_, factual_values, node),
                                    slice_parents(graph_, factual_values, node));
      write_node(graph_, out, node, decode_batch(model, z, slice_parents(graph_, out, node)));
    }
  }
  return out;
}

nlohmann::json DcmModel::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& [node, model] : node_models_) models.push_back(node_model_to_json(model));
  nlohmann::json roots = nlohmann::json::object();
  for (const auto& [node, pool] : root_empiricals_)
    roots[std::to_string(node + 1)] = matrix_to_json(pool);
  return {{"schema_version", 1},
          {"type", "dcm"},
          {"graph", graph_.to_json()},
          {"hyper",
           {{"T", hyper_.T},
            {"beta_min", hyper_.beta_min},
            {"beta_max", hyper_.beta_max},
            {"epochs", hyper_.train.epochs},
            {"batch_size", hyper_.train.batch_size},
            {"learning_rate", hyper_.train.learning_rate},
            {"hidden", hyper_.train.hidden}}},
          {"node_models", models},
          {"root_empiricals", roots}};
}

DcmModel DcmModel::from_json(const nlohmann::json& j) {
  require(j.at("type") == "dcm", "model file is not a dcm model");
  CausalGraph graph = CausalGraph::from_json(j.at("graph"));
  DcmHyperparams hyper;
  const auto& h = j.at("hyper");
  hyper.T = h.at("T").get<int>();
  hyper.beta_min = h.at("beta_min").get<double>();
  hyper.beta_max = h.at("beta_max").get<double>();
  hyper.train.epochs = h.at("epochs").get<int>();
  hyper.train.batch_size = h.at("batch_size").get<int>();
  hyper.train.learning_rate = h.at("learning_rate").get<double>();
  hyper.train.hidden = h.at("hidden").get<std::vector<int>>();
  std::map<int, DiffusionNodeModel> models;
  for (const auto& m : j.at("node_models")) {
    DiffusionNodeModel model = node_model_from_json(m);
    models.emplace(model.node, std::move(model));
  }
  std::map<int, Matrix> roots;
  for (const auto& [key, value] : j.at("root_empiricals").items())
    roots.emplace(std::stoi(key) - 1, matrix_from_json(value));
  return DcmModel(std::move(graph), std::move(models), std::move(roots), hyper);
}

// ---------------------------------------------------------------------------

AnmModel::AnmModel(CausalGraph graph, std::map<int, std::unique_ptr<Regressor>> regressors,
                   std::map<int, Matrix> residuals, std::map<int, Matrix> root_empiricals,
                   std::map<int, CvSelection> selections)
    : graph_(std::move(graph)),
      regressors_(std::move(regressors)),
      residuals_(std::move(residuals)),
      root_empiricals_(std::move(root_empiricals)),
      selections_(std::move(selections)) {
  for (int node : graph_.non_roots()) {
    require(regressors_.count(node), "AnmModel: missing regressor for node " +
                                         std::to_string(node + 1));
    require(residuals_.count(node), "AnmModel: missing residuals for node " +
                                        std::to_string(node + 1));
  }
  for (int node : graph_.roots())
    require(root_empiricals_.count(node), "AnmModel: missing root empiricals");
}

const Regressor& AnmModel::regressor(int node) const {
  const auto it = regressors_.find(node);
  require(it != regressors_.end(), "AnmModel: no regressor for node " + std::to_string(node + 1));
  return *it->second;
}

AnmModel fit_anm(const Matrix& dataset, const CausalGraph& graph, Rng& rng,
                 const AnmOptions& opt) {
  require(dataset.cols() == graph.total_dim(), "fit_anm: dataset columns must cover all nodes");
  std::map<int, std::unique_ptr<Regressor>> regressors;
  std::map<int, Matrix> residuals;
  std::map<int, CvSelection> selections;
  for (int node : graph.non_roots()) {
    const Matrix y = slice_node(graph, dataset, node);
    const Matrix x = slice_parents(graph, dataset, node);
    // degenerate target: constant predictor via ridge on zero-variance data
    Rng cv = rng.substream("anm_cv", node);
    auto [winner, sel] = select_regressor_cv(x, y, opt.cv_folds, cv, opt.mlp);
    Matrix resid = y;
    const Matrix pred = winner->predict(x);
    for (std::size_t i = 0; i < resid.size(); ++i) resid.data()[i] -= pred.data()[i];
    regressors.emplace(node, std::move(winner));
    residuals.emplace(node, std::move(resid));
    selections.emplace(node, std::move(sel));
  }
  std::map<int, Matrix> roots;
  for (int node : graph.roots()) roots.emplace(node, slice_node(graph, dataset, node));
  return AnmModel(graph, std::move(regressors), std::move(residuals), std::move(roots),
                  std::move(selections));
}

Matrix AnmModel::sample(const InterventionMap& iv, int n, Rng& rng) const {
  require(n >= 1, "sample: n must be at least 1");
  Matrix out(n, graph_.total_dim());
  for (int node : graph_.topological_order()) {
    const auto it = iv.find(node);
    if (it != iv.end()) {
      require(static_cast<int>(it->second.size()) == graph_.node_dim(node),
              "sample: intervention dim mismatch at node " + std::to_string(node + 1));
      const int off = graph_.col_offset(node);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < graph_.node_dim(node); ++j) out(r, off + j) = it->second[j];
    } else if (graph_.is_root(node)) {
      const Matrix& pool = root_empiricals_.at(node);
      const int off = graph_.col_offset(node);
      for (int r = 0; r < n; ++r) {
        const int pick = static_cast<int>(rng.uniform_int(0, pool.rows() - 1));
        for (int j = 0; j < pool.cols(); ++j) out(r, off + j) = pool(pick, j);
      }
    } else {
      Matrix value = regressors_.at(node)->predict(slice_parents(graph_, out, node));
      const Matrix& pool = residuals_.at(node);
      for (int r = 0; r < n; ++r) {
        const int pick = static_cast<int>(rng.uniform_int(0, pool.rows() - 1));
        for (int j = 0; j < value.cols(); ++j) value(r, j) += pool(pick, j);
      }
      write_node(graph_, out, node, value);
    }
  }
  return out;
}

Matrix AnmModel::counterfactual(const Matrix& factual_values, const InterventionMap& iv) const {
  check_factual(graph_, factual_values);
  const std::vector<bool> affected = descendant_mask(graph_, iv);
  Matrix out = factual_values;
  for (int node : graph_.topological_order()) {
    const auto it = iv.find(node);
    if (it != iv.end()) {
      require(static_cast<int>(it->second.size()) == graph_.node_dim(node),
              "counterfactual: intervention dim mismatch at node " + std::to_string(node + 1));
      const int off = graph_.col_offset(node);
      for (int r = 0; r < out.rows(); ++r)
        for (int j = 0; j < graph_.node_dim(node); ++j) out(r, off + j) = it->second[j];
    } else if (affected[node]) {
      if (graph_.is_root(node)) continue;
      const Regressor& f = *regressors_.at(node);
      // abduct the residual on factual data, predict with counterfactual parents
      const Matrix fact_pred = f.predict(slice_parents(graph_, factual_values, node));
      const Matrix fact_y = slice_node(graph_, factual_values, node);
      Matrix value = f.predict(slice_parents(graph_, out, node));
      for (int r = 0; r < out.rows(); ++r)
        for (int j = 0; j < value.cols(); ++j)
          value(r, j) += fact_y(r, j) - fact_pred(r, j);
      write_node(graph_, out, node, value);
    }
  }
  return out;
}

nlohmann::json AnmModel::to_json() const {
  nlohmann::json regs = nlohmann::json::object();
  nlohmann::json resids = nlohmann::json::object();
  nlohmann::json sels = nlohmann::json::object();
  for (const auto& [node, reg] : regressors_) {
    const std::string key = std::to_string(node + 1);
    regs[key] = reg->to_json();
    resids[key] = matrix_to_json(residuals_.at(node));
    if (selections_.count(node)) {
      nlohmann::json scores = nlohmann::json::array();
      for (const auto& [name, rmse] : selections_.at(node).cv_rmse)
        scores.push_back({{"model", name}, {"cv_rmse", rmse}});
      sels[key] = {{"chosen", selections_.at(node).chosen}, {"scores", scores}};
    }
  }
  nlohmann::json roots = nlohmann::json::object();
  for (const auto& [node, pool] : root_empiricals_)
    roots[std::to_string(node + 1)] = matrix_to_json(pool);
  return {{"schema_version", 1}, {"type", "anm"},      {"graph", graph_.to_json()},
          {"regressors", regs},  {"residuals", resids}, {"root_empiricals", roots},
          {"selection", sels}};
}

AnmModel AnmModel::from_json(const nlohmann::json& j) {
  require(j.at("type") == "anm", "model file is not an anm model");
  CausalGraph graph = CausalGraph::from_json(j.at("graph"));
  std::map<int, std::unique_ptr<Regressor>> regs;
  for (const auto& [key, value] : j.at("regressors").items())
    regs.emplace(std::stoi(key) - 1, Regressor::from_json(value));
  std::map<int, Matrix> resids;
  for (const auto& [key, value] : j.at("residuals").items())
    resids.emplace(std::stoi(key) - 1, matrix_from_json(value));
  std::map<int, Matrix> roots;
  for (const auto& [key, value] : j.at("root_empiricals").items())
    roots.emplace(std::stoi(key) - 1, matrix_from_json(value));
  return AnmModel(std::move(graph), std::move(regs), std::move(resids), std::move(roots));
}

// ---------------------------------------------------------------------------

Matrix OracleModel::counterfactual(const Matrix& factual_values, const InterventionMap& iv) const {
  check_factual(scm_->graph(), factual_values);
  Matrix out(factual_values.rows(), factual_values.cols());
  for (int r = 0; r < factual_values.rows(); ++r) {
    const Vector row = factual_values.row_vec(r);
    const auto noises = scm_->abduct_noise_row(row);
    require(noises.has_value(),
            "oracle counterfactual from values alone needs invertible mechanisms; "
            "pass noise traces instead");
    out.set_row(r, scm_->true_counterfactual_row(row, *noises, iv));
  }
  return out;
}

}  // namespace dcm
