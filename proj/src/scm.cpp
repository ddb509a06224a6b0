#include "dcm/scm.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/serialize.hpp"

namespace dcm {

SemKind sem_kind_from_string(const std::string& s) {
  if (s == "NLIN" || s == "nlin") return SemKind::Nlin;
  if (s == "NADD" || s == "nadd") return SemKind::Nadd;
  throw Error("unknown SEM kind: " + s);
}

std::string to_string(SemKind k) { return k == SemKind::Nlin ? "NLIN" : "NADD"; }

// ---------------------------------------------------------------------------
// mechanisms

nlohmann::json IdentityMechanism::to_json() const { return {{"kind", "identity"}, {"dim", dim_}}; }

LinearMechanism::LinearMechanism(Matrix w, Vector b, Vector noise_scale)
    : weights_(std::move(w)), bias_(std::move(b)), noise_scale_(std::move(noise_scale)) {
  require(weights_.rows() == static_cast<int>(bias_.size()) &&
              bias_.size() == noise_scale_.size(),
          "LinearMechanism: inconsistent shapes");
}

Vector LinearMechanism::eval(const Vector& raw_parents, const Vector& noise) const {
  require(static_cast<int>(raw_parents.size()) == weights_.cols(),
          "LinearMechanism: parent width mismatch");
  Vector out(bias_);
  for (int i = 0; i < weights_.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < weights_.cols(); ++j) acc += weights_(i, j) * raw_parents[j];
    out[i] += acc + noise_scale_[i] * noise[i];
  }
  return out;
}

std::optional<Vector> LinearMechanism::invert_noise(const Vector& raw_value,
                                                    const Vector& raw_parents) const {
  Vector u(bias_.size());
  for (int i = 0; i < weights_.rows(); ++i) {
    double acc = bias_[i];
    for (int j = 0; j < weights_.cols(); ++j) acc += weights_(i, j) * raw_parents[j];
    u[i] = (raw_value[i] - acc) / noise_scale_[i];
  }
  return u;
}

nlohmann::json LinearMechanism::to_json() const {
  return {{"kind", "linear"},
          {"W", matrix_to_json(weights_)},
          {"b", bias_},
          {"noise_scale", noise_scale_}};
}

Table4Mechanism::Table4Mechanism(GraphKind graph, SemKind sem, int node)
    : graph_(graph), sem_(sem), node_(node) {
  const bool known =
      (graph == GraphKind::Chain && (node == 1 || node == 2)) ||
      (graph == GraphKind::Triangle && (node == 1 || node == 2)) ||
      (graph == GraphKind::Diamond && (node == 1 || node == 2 || node == 3)) ||
      (graph == GraphKind::Y && (node == 2 || node == 3));
  require(known, "Table4Mechanism: no equation for this graph/node");
}

namespace {
inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

double Table4Mechanism::additive_base(const Vector& p) const {
  switch (graph_) {
    case GraphKind::Chain:
      return node_ == 1 ? std::exp(p[0] / 2.0) : std::pow(p[0] - 5.0, 3.0) / 15.0;
    case GraphKind::Triangle:
      return node_ == 1 ? 2.0 * p[0] * p[0] : 20.0 * logistic(p[1] * p[1] - p[0]);
    case GraphKind::Diamond:
      if (node_ == 1) return p[0] * p[0];
      if (node_ == 2) return p[1] * p[1] - 2.0 * logistic(p[0]);
      return p[1] / (std::fabs(p[0] + 2.0) + p[1] + 0.5);
    case GraphKind::Y:
      if (node_ == 2) return 4.0 * logistic(p[0] + p[1]) - p[1] * p[1];
      return 20.0 * logistic(-(p[0] * p[0] / 2.0 - p[0]));
    default:
      throw Error("Table4Mechanism: bad graph");
  }
}

double Table4Mechanism::additive_coef() const {
  switch (graph_) {
    case GraphKind::Chain: return node_ == 1 ? 0.25 : 1.0;
    case GraphKind::Triangle: return 1.0;
    case GraphKind::Diamond: return node_ == 1 ? 0.5 : (node_ == 2 ? 0.5 : 0.1);
    case GraphKind::Y: return node_ == 2 ? 0.5 : 1.0;
    default: throw Error("Table4Mechanism: bad graph");
  }
}

Vector Table4Mechanism::eval(const Vector& p, const Vector& noise) const {
  const double u = noise[0];
  if (sem_ == SemKind::Nlin) return {additive_base(p) + additive_coef() * u};
  switch (graph_) {
    case GraphKind::Chain:
      if (node_ == 1) return {1.0 / ((u + p[0]) * (u + p[0]) + 0.5)};
      return {std::sqrt(p[0] + std::fabs(u)) / (0.1 + p[0])};
    case GraphKind::Triangle:
      if (node_ == 1) return {p[0] / ((u + p[0]) * (u + p[0]) + 1.0) + u / 4.0};
      {
        const double t = -p[0] + p[1] / 2.0 + std::fabs(u) / 5.0;
        return {(std::fabs(u) + 0.3) * t * t};
      }
    case GraphKind::Diamond:
      if (node_ == 1)
        return {std::sqrt(std::fabs(p[0])) * (std::fabs(u) + 0.1) / 2.0 + std::fabs(p[0]) +
                u / 5.0};
      if (node_ == 2) return {1.0 / (1.0 + (std::fabs(u) + 0.5) * std::exp(-p[1] + p[0]))};
      {
        const double t = p[1] + p[0] + u / 4.0 - 7.0;
        return {t * t - 20.0};
      }
    case GraphKind::Y:
      if (node_ == 2) return {(p[0] - 2.0 * p[1] - 2.0) * (std::fabs(u) + 0.2)};
      {
        const double t = std::cos(p[0]) + u / 2.0;
        return {t * t};
      }
    default:
      throw Error("Table4Mechanism: bad graph");
  }
}

std::optional<Vector> Table4Mechanism::invert_noise(const Vector& raw_value,
                                                    const Vector& raw_parents) const {
  if (sem_ != SemKind::Nlin) return std::nullopt;
  return Vector{(raw_value[0] - additive_base(raw_parents)) / additive_coef()};
}

nlohmann::json Table4Mechanism::to_json() const {
  return {{"kind", "table4"},
          {"graph", dcm::to_string(graph_)},
          {"sem", dcm::to_string(sem_)},
          {"node", node_ + 1}};
}

Vector MlpAdditiveMechanism::eval(const Vector& raw_parents, const Vector& noise) const {
  Vector out = mlp_apply(net_, raw_parents);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise_scale_ * noise[i];
  return out;
}

std::optional<Vector> MlpAdditiveMechanism::invert_noise(const Vector& raw_value,
                                                         const Vector& raw_parents) const {
  const Vector base = mlp_apply(net_, raw_parents);
  Vector u(base.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (raw_value[i] - base[i]) / noise_scale_;
  return u;
}

nlohmann::json MlpAdditiveMechanism::to_json() const {
  return {{"kind", "mlp_additive"}, {"net", mlp_to_json(net_)}, {"noise_scale", noise_scale_}};
}

Vector MlpNonadditiveMechanism::eval(const Vector& raw_parents, const Vector& noise) const {
  Vector in(raw_parents);
  for (double v : noise) in.push_back(noise_input_scale_ * v);
  return mlp_apply(net_, in);
}

nlohmann::json MlpNonadditiveMechanism::to_json() const {
  return {{"kind", "mlp_nonadditive"},
          {"net", mlp_to_json(net_)},
          {"out_dim", out_dim_},
          {"noise_input_scale", noise_input_scale_}};
}

std::unique_ptr<Mechanism> Mechanism::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return std::make_unique<IdentityMechanism>(j.at("dim").get<int>());
  if (kind == "linear")
    return std::make_unique<LinearMechanism>(matrix_from_json(j.at("W")), j.at("b").get<Vector>(),
                                             j.at("noise_scale").get<Vector>());
  if (kind == "table4")
    return std::make_unique<Table4Mechanism>(graph_kind_from_string(j.at("graph").get<std::string>()),
                                             sem_kind_from_string(j.at("sem").get<std::string>()),
                                             j.at("node").get<int>() - 1);
  if (kind == "mlp_additive")
    return std::make_unique<MlpAdditiveMechanism>(mlp_from_json(j.at("net")),
                                                  j.at("noise_scale").get<double>());
  if (kind == "mlp_nonadditive")
    return std::make_unique<MlpNonadditiveMechanism>(mlp_from_json(j.at("net")),
                                                     j.at("out_dim").get<int>(),
                                                     j.at("noise_input_scale").get<double>());
  throw Error("unknown mechanism kind: " + kind);
}

// ---------------------------------------------------------------------------
// structural equations and the SCM

StructuralEquation::StructuralEquation(int n, std::unique_ptr<Mechanism> m)
    : node(n), mechanism(std::move(m)) {
  shift.assign(mechanism->output_dim(), 0.0);
  scale.assign(mechanism->output_dim(), 1.0);
}

StructuralEquation::StructuralEquation(const StructuralEquation& o)
    : node(o.node), mechanism(o.mechanism ? o.mechanism->clone() : nullptr), shift(o.shift),
      scale(o.scale) {}

StructuralEquation& StructuralEquation::operator=(const StructuralEquation& o) {
  node = o.node;
  mechanism = o.mechanism ? o.mechanism->clone() : nullptr;
  shift = o.shift;
  scale = o.scale;
  return *this;
}

GroundTruthScm::GroundTruthScm(CausalGraph graph, std::vector<StructuralEquation> equations)
    : graph_(std::move(graph)), equations_(std::move(equations)) {
  require(static_cast<int>(equations_.size()) == graph_.num_nodes(),
          "GroundTruthScm: need exactly one equation per node");
  for (int i = 0; i < graph_.num_nodes(); ++i) {
    require(equations_[i].node == i, "GroundTruthScm: equations out of order");
    require(equations_[i].mechanism->output_dim() == graph_.node_dim(i),
            "GroundTruthScm: mechanism output dim mismatch at node " + std::to_string(i + 1));
  }
  noise_offsets_.resize(graph_.num_nodes() + 1);
  noise_offsets_[0] = 0;
  for (int i = 0; i < graph_.num_nodes(); ++i)
    noise_offsets_[i + 1] = noise_offsets_[i] + equations_[i].mechanism->noise_dim();
}

Vector GroundTruthScm::gather_parents(int node, const double* row_values) const {
  Vector out;
  for (int p : graph_.parents(node)) {
    const int off = graph_.col_offset(p);
    for (int d = 0; d < graph_.node_dim(p); ++d) out.push_back(row_values[off + d]);
  }
  return out;
}

Vector GroundTruthScm::eval_node(int node, const Vector& normalized_parents,
                                 const Vector& noise) const {
  // un-normalize parents, evaluate the raw mechanism, re-normalize the output
  Vector raw_parents(normalized_parents.size());
  std::size_t k = 0;
  for (int p : graph_.parents(node)) {
    const auto& peq = equations_[p];
    for (int d = 0; d < graph_.node_dim(p); ++d, ++k)
      raw_parents[k] = normalized_parents[k] * peq.scale[d] + peq.shift[d];
  }
  Vector raw = equations_[node].mechanism->eval(raw_parents, noise);
  const auto& eq = equations_[node];
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (raw[i] - eq.shift[i]) / eq.scale[i];
  return raw;
}

void GroundTruthScm::validate_interventions(const InterventionMap& iv) const {
  for (const auto& [node, value] : iv) {
    require(node >= 0 && node < graph_.num_nodes(), "intervention: invalid node index");
    require(static_cast<int>(value.size()) == graph_.node_dim(node),
            "intervention on node " + std::to_string(node + 1) + ": expected dim " +
                std::to_string(graph_.node_dim(node)) + ", got " + std::to_string(value.size()));
  }
}

TracedMatrix GroundTruthScm::sample_interventional(const InterventionMap& iv, int n,
                                                   Rng& rng) const {
  require(n >= 1, "sample: n must be at least 1");
  validate_interventions(iv);
  TracedMatrix out{Matrix(n, graph_.total_dim()), Matrix(n, total_noise_dim())};
  for (int r = 0; r < n; ++r) {
    double* row = out.values.row(r);
    double* noise_row = out.noises.row(r);
    for (int node : graph_.topological_order()) {
      const int nd = noise_dim(node);
      Vector u(nd);
      for (int d = 0; d < nd; ++d) u[d] = rng.normal();
      std::copy(u.begin(), u.end(), noise_row + noise_offset(node));
      const auto it = iv.find(node);
      Vector value = (it != iv.end()) ? it->second
                                      : eval_node(node, gather_parents(node, row), u);
      std::copy(value.begin(), value.end(), row + graph_.col_offset(node));
    }
  }
  return out;
}

TracedMatrix GroundTruthScm::sample_observational(int n, Rng& rng) const {
  return sample_interventional({}, n, rng);
}

Vector GroundTruthScm::true_counterfactual_row(const Vector& values, const Vector& noises,
                                               const InterventionMap& iv) const {
  require(static_cast<int>(values.size()) == graph_.total_dim(),
          "true_counterfactual: factual row width mismatch");
  require(static_cast<int>(noises.size()) == total_noise_dim(),
          "true_counterfactual: missing noise record");
  validate_interventions(iv);
  std::vector<bool> affected(graph_.num_nodes(), false);
  for (const auto& [node, _] : iv)
    for (int d : graph_.descendants(node)) affected[d] = true;

  Vector out = values;
  for (int node : graph_.topological_order()) {
    const auto it = iv.find(node);
    if (it != iv.end()) {
      std::copy(it->second.begin(), it->second.end(), out.begin() + graph_.col_offset(node));
    } else if (affected[node]) {
      const Vector u(noises.begin() + noise_offset(node),
                     noises.begin() + noise_offset(node) + noise_dim(node));
      const Vector value = eval_node(node, gather_parents(node, out.data()), u);
      std::copy(value.begin(), value.end(), out.begin() + graph_.col_offset(node));
    }  // non-descendants keep their factual value
  }
  return out;
}

Matrix GroundTruthScm::true_counterfactual(const TracedMatrix& factual,
                                           const InterventionMap& iv) const {
  Matrix out(factual.values.rows(), graph_.total_dim());
  for (int r = 0; r < factual.values.rows(); ++r)
    out.set_row(r, true_counterfactual_row(factual.values.row_vec(r), factual.noises.row_vec(r), iv));
  return out;
}

std::optional<Vector> GroundTruthScm::abduct_noise_row(const Vector& values) const {
  Vector noises(total_noise_dim());
  for (int node : graph_.topological_order()) {
    const auto& eq = equations_[node];
    Vector raw_parents;
    for (int p : graph_.parents(node)) {
      const auto& peq = equations_[p];
      for (int d = 0; d < graph_.node_dim(p); ++d)
        raw_parents.push_back(values[graph_.col_offset(p) + d] * peq.scale[d] + peq.shift[d]);
    }
    Vector raw_value(graph_.node_dim(node));
    for (int d = 0; d < graph_.node_dim(node); ++d)
      raw_value[d] = values[graph_.col_offset(node) + d] * eq.scale[d] + eq.shift[d];
    const auto u = eq.mechanism->invert_noise(raw_value, raw_parents);
    if (!u) return std::nullopt;
    std::copy(u->begin(), u->end(), noises.begin() + noise_offset(node));
  }
  return noises;
}

nlohmann::json GroundTruthScm::to_json() const {
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto& eq : equations_)
    eqs.push_back({{"node", eq.node + 1},
                   {"mechanism", eq.mechanism->to_json()},
                   {"shift", eq.shift},
                   {"scale", eq.scale}});
  return {{"schema_version", 1}, {"type", "scm"}, {"graph", graph_.to_json()}, {"equations", eqs}};
}

GroundTruthScm GroundTruthScm::from_json(const nlohmann::json& j) {
  CausalGraph graph = CausalGraph::from_json(j.at("graph"));
  std::vector<StructuralEquation> eqs;
  eqs.resize(graph.num_nodes());
  for (const auto& e : j.at("equations")) {
    const int node = e.at("node").get<int>() - 1;
    StructuralEquation eq(node, Mechanism::from_json(e.at("mechanism")));
    eq.shift = e.at("shift").get<Vector>();
    eq.scale = e.at("scale").get<Vector>();
    eqs[node] = std::move(eq);
  }
  return GroundTruthScm(std::move(graph), std::move(eqs));
}

// ---------------------------------------------------------------------------
// builders

namespace {

// Sample only the topological prefix [0, upto]; later columns stay zero.
Matrix sample_prefix(const GroundTruthScm& scm, int upto, int n, Rng& rng) {
  const auto& topo = scm.graph().topological_order();
  Matrix values(n, scm.graph().total_dim());
  for (int r = 0; r < n; ++r) {
    double* row = values.row(r);
    for (int k = 0; k <= upto; ++k) {
      const int node = topo[k];
      Vector u(scm.noise_dim(node));
      for (auto& v : u) v = rng.normal();
      const Vector value = scm.eval_node(node, scm.gather_parents(node, row), u);
      std::copy(value.begin(), value.end(), row + scm.graph().col_offset(node));
    }
  }
  return values;
}

void normalize_node_from_prefix(GroundTruthScm& scm, int topo_pos, int n, Rng rng) {
  const int node = scm.graph().topological_order()[topo_pos];
  if (scm.graph().is_root(node)) return;  // roots stay x = u
  Matrix sample = sample_prefix(scm, topo_pos, n, rng);
  auto& eq = scm.equation(node);
  const int off = scm.graph().col_offset(node);
  for (int d = 0; d < scm.graph().node_dim(node); ++d) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += sample(r, off + d);
    mean /= n;
    double var = 0.0;
    for (int r = 0; r < n; ++r) {
      const double c = sample(r, off + d) - mean;
      var += c * c;
    }
    var /= (n - 1);
    eq.shift[d] = mean;
    eq.scale[d] = std::max(std::sqrt(var), 1e-9);
  }
}

Mlp random_unit_mlp(const std::vector<int>& sizes, Rng& rng) {
  Mlp net = make_mlp(sizes, rng);
  for (auto& w : net.weights)
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
  for (auto& b : net.biases)
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
  return net;
}

double mean_column_variance(const Matrix& m) {
  double total = 0.0;
  for (int j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (int i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= m.rows();
    double var = 0.0;
    for (int i = 0; i < m.rows(); ++i) {
      const double c = m(i, j) - mean;
      var += c * c;
    }
    total += var / (m.rows() - 1);
  }
  return total / m.cols();
}

// Var_U E[f | U] / E_U Var[f | U], averaged over output dims. Parent rows are
// reused across the noise grid.
double nonadditive_ratio(const Mechanism& mech, const std::vector<Vector>& raw_parent_rows,
                         const std::vector<Vector>& noise_rows) {
  const int d = mech.output_dim();
  const int g = static_cast<int>(noise_rows.size());
  const int np = static_cast<int>(raw_parent_rows.size());
  Matrix cond_mean(g, d);
  Vector cond_var_acc(d, 0.0);
  for (int j = 0; j < g; ++j) {
    Vector mean(d, 0.0), m2(d, 0.0);
    for (int i = 0; i < np; ++i) {
      const Vector v = mech.eval(raw_parent_rows[i], noise_rows[j]);
      for (int k = 0; k < d; ++k) {
        mean[k] += v[k];
        m2[k] += v[k] * v[k];
      }
    }
    for (int k = 0; k < d; ++k) {
      mean[k] /= np;
      cond_mean(j, k) = mean[k];
      cond_var_acc[k] += std::max(m2[k] / np - mean[k] * mean[k], 0.0);
    }
  }
  double num = 0.0, den = 0.0;
  for (int k = 0; k < d; ++k) {
    double mean = 0.0;
    for (int j = 0; j < g; ++j) mean += cond_mean(j, k);
    mean /= g;
    double var = 0.0;
    for (int j = 0; j < g; ++j) {
      const double c = cond_mean(j, k) - mean;
      var += c * c;
    }
    num += var / std::max(g - 1, 1);
    den += cond_var_acc[k] / g;
  }
  return num / std::max(den, 1e-300);
}

}  // namespace

void estimate_normalization(GroundTruthScm& scm, Rng& rng, int n) {
  const int K = scm.graph().num_nodes();
  for (int pos = 0; pos < K; ++pos)
    normalize_node_from_prefix(scm, pos, n, rng.substream("normalize", pos));
}

GroundTruthScm fixed_scm(GraphKind kind, SemKind sem, Rng& rng, bool normalize) {
  require(kind == GraphKind::Chain || kind == GraphKind::Triangle ||
              kind == GraphKind::Diamond || kind == GraphKind::Y,
          "fixed_scm: only the four small graphs have fixed equations");
  CausalGraph graph = named_graph(kind);
  std::vector<StructuralEquation> eqs;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    if (graph.is_root(i))
      eqs.emplace_back(i, std::make_unique<IdentityMechanism>(1));
    else
      eqs.emplace_back(i, std::make_unique<Table4Mechanism>(kind, sem, i));
  }
  GroundTruthScm scm(std::move(graph), std::move(eqs));
  if (normalize) estimate_normalization(scm, rng);
  return scm;
}

double estimate_variance_ratio(const GroundTruthScm& scm, int node, SemKind sem, Rng& rng,
                               const BenchmarkScmOptions& opt) {
  require(!scm.graph().is_root(node), "estimate_variance_ratio: node is a root");
  const auto& topo = scm.graph().topological_order();
  int pos = 0;
  while (topo[pos] != node) ++pos;
  // parent rows on the raw scale
  Rng r_parents = rng.substream("ratio_parents", node);
  const int np = (sem == SemKind::Nlin) ? opt.signal_samples : opt.parent_samples;
  Matrix sample = sample_prefix(scm, pos - 1 >= 0 ? pos - 1 : 0, np, r_parents);
  std::vector<Vector> raw_parents(np);
  for (int r = 0; r < np; ++r) {
    Vector pa = scm.gather_parents(node, sample.row(r));
    std::size_t k = 0;
    for (int p : scm.graph().parents(node)) {
      const auto& peq = scm.equation(p);
      for (int d = 0; d < scm.graph().node_dim(p); ++d, ++k)
        pa[k] = pa[k] * peq.scale[d] + peq.shift[d];
    }
    raw_parents[r] = std::move(pa);
  }
  const Mechanism& mech = *scm.equation(node).mechanism;
  Rng r_noise = rng.substream("ratio_noise", node);
  if (sem == SemKind::Nlin) {
    // additive: Var[noise path] / Var[f1(parents)]
    Matrix base(np, mech.output_dim());
    const Vector zero(mech.noise_dim(), 0.0);
    for (int r = 0; r < np; ++r) base.set_row(r, mech.eval(raw_parents[r], zero));
    const double var_signal = mean_column_variance(base);
    Matrix noise_only(opt.signal_samples, mech.output_dim());
    const Vector zero_pa(raw_parents[0].size(), 0.0);
    for (int r = 0; r < opt.signal_samples; ++r) {
      Vector u(mech.noise_dim());
      for (auto& v : u) v = r_noise.normal();
      Vector with = mech.eval(raw_parents[0], u);
      const Vector base0 = mech.eval(raw_parents[0], zero);
      for (std::size_t i = 0; i < with.size(); ++i) with[i] -= base0[i];
      noise_only.set_row(r, with);
    }
    return mean_column_variance(noise_only) / std::max(var_signal, 1e-300);
  }
  std::vector<Vector> noise_rows(opt.noise_grid);
  for (auto& u : noise_rows) {
    u.resize(mech.noise_dim());
    for (auto& v : u) v = r_noise.normal();
  }
  return nonadditive_ratio(mech, raw_parents, noise_rows);
}

GroundTruthScm build_benchmark_scm(GraphKind kind, SemKind sem, Rng& rng,
                                   const BenchmarkScmOptions& opt) {
  Rng graph_rng = rng.substream("graph");
  CausalGraph graph = named_graph(kind, &graph_rng);
  std::vector<StructuralEquation> eqs;
  for (int i = 0; i < graph.num_nodes(); ++i)
    eqs.emplace_back(i, std::make_unique<IdentityMechanism>(graph.node_dim(i)));
  GroundTruthScm scm(std::move(graph), std::move(eqs));

  const auto& topo = scm.graph().topological_order();
  for (int pos = 0; pos < scm.graph().num_nodes(); ++pos) {
    const int node = topo[pos];
    if (scm.graph().is_root(node)) continue;
    const int d = scm.graph().node_dim(node);
    int pa_dim = 0;
    for (int p : scm.graph().parents(node)) pa_dim += scm.graph().node_dim(p);

    bool done = false;
    for (int redraw = 0; redraw < opt.max_weight_redraws && !done; ++redraw) {
      Rng wrng = rng.substream("weights", static_cast<std::uint64_t>(node) * 1000 + redraw);
      if (sem == SemKind::Nlin) {
        Mlp net = random_unit_mlp({pa_dim, opt.hidden_units, d}, wrng);
        scm.equation(node).mechanism = std::make_unique<MlpAdditiveMechanism>(net, 1.0);
        Rng ratio_rng = rng.substream("ratio", static_cast<std::uint64_t>(node) * 1000 + redraw);
        const double ratio = estimate_variance_ratio(scm, node, sem, ratio_rng, opt);
        if (!std::isfinite(ratio) || ratio > 1e6) continue;  // degenerate signal path
        double scale = 1.0;
        if (ratio < opt.ratio_lo || ratio > opt.ratio_hi) scale = std::sqrt(opt.ratio_mid / ratio);
        scm.equation(node).mechanism = std::make_unique<MlpAdditiveMechanism>(net, scale);
        const double check = estimate_variance_ratio(scm, node, sem, ratio_rng, opt);
        done = check >= opt.ratio_lo && check <= opt.ratio_hi;
      } else {
        Mlp net = random_unit_mlp({pa_dim + d, opt.hidden_units, d}, wrng);
        double scale = 1.0;
        for (int iter = 0; iter < opt.max_scale_iters && !done; ++iter) {
          scm.equation(node).mechanism =
              std::make_unique<MlpNonadditiveMechanism>(net, d, scale);
          Rng ratio_rng = rng.substream("ratio", static_cast<std::uint64_t>(node) * 1000 + redraw);
          const double ratio = estimate_variance_ratio(scm, node, sem, ratio_rng, opt);
          if (!std::isfinite(ratio) || ratio <= 0.0) break;
          if (ratio >= opt.ratio_lo && ratio <= opt.ratio_hi) {
            done = true;
            break;
          }
          double factor = std::sqrt(opt.ratio_mid / ratio);
          factor = std::clamp(factor, 0.25, 4.0);
          scale *= factor;
          if (scale < 1e-8 || scale > 1e8) break;
        }
      }
    }
    if (!done)
      throw CalibrationError("build_benchmark_scm: variance-ratio calibration failed at node " +
                             std::to_string(node + 1));
    normalize_node_from_prefix(scm, pos, opt.calib_samples,
                               rng.substream("normalize", node));
  }
  return scm;
}

GroundTruthScm linear_benchmark_scm(const CausalGraph& graph, Rng& rng) {
  std::vector<StructuralEquation> eqs;
  for (int i = 0; i < graph.num_nodes(); ++i)
    eqs.emplace_back(i, std::make_unique<IdentityMechanism>(graph.node_dim(i)));
  GroundTruthScm scm(graph, std::move(eqs));
  const auto& topo = graph.topological_order();
  for (int pos = 0; pos < graph.num_nodes(); ++pos) {
    const int node = topo[pos];
    if (graph.is_root(node)) continue;
    const int d = graph.node_dim(node);
    int pa_dim = 0;
    for (int p : graph.parents(node)) pa_dim += graph.node_dim(p);
    Rng wrng = rng.substream("linear", node);
    Matrix w(d, pa_dim);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < pa_dim; ++j) {
        const double mag = wrng.uniform(0.5, 2.0);
        w(i, j) = wrng.uniform() < 0.5 ? -mag : mag;
      }
    Vector b(d, 0.0);
    scm.equation(node).mechanism =
        std::make_unique<LinearMechanism>(w, b, Vector(d, 1.0));
    Rng ratio_rng = rng.substream("linratio", node);
    const double ratio = estimate_variance_ratio(scm, node, SemKind::Nlin, ratio_rng);
    const double noise_scale = std::sqrt(0.2 / ratio);
    scm.equation(node).mechanism =
        std::make_unique<LinearMechanism>(w, b, Vector(d, noise_scale));
    normalize_node_from_prefix(scm, pos, 10000, rng.substream("normalize", node));
  }
  return scm;
}

}  // namespace dcm
