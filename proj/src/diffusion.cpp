#include "dcm/diffusion.hpp"

#include <cmath>

#include "dcm/serialize.hpp"

namespace dcm {

NoiseSchedule make_schedule(int T, double beta_min, double beta_max) {
  require(T >= 1, "make_schedule: T must be at least 1");
  require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
          "make_schedule: need 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(T);
  s.alphas.resize(T);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double beta =
        T == 1 ? beta_min : (beta_max - beta_min) * (t - 1) / static_cast<double>(T - 1) + beta_min;
    prod *= 1.0 - beta;
    s.betas[t - 1] = beta;
    s.alphas[t - 1] = prod;
  }
  return s;
}

DiffusionNodeModel make_node_model(int node, int dim, int parent_dim,
                                   const NoiseSchedule& schedule,
                                   const std::vector<int>& hidden, Rng& rng) {
  DiffusionNodeModel m;
  m.node = node;
  m.dim = dim;
  m.parent_dim = parent_dim;
  m.schedule = schedule;
  std::vector<int> sizes;
  sizes.push_back(m.input_dim());
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(dim);
  m.net = make_mlp(sizes, rng);
  return m;
}

std::vector<double> train_node(DiffusionNodeModel& model, const Matrix& node_values,
                               const Matrix& parent_values, const TrainOptions& opt, Rng& rng) {
  require(node_values.cols() == model.dim, "train_node: node column width mismatch");
  require(parent_values.cols() == model.parent_dim, "train_node: parent column width mismatch");
  require(node_values.rows() == parent_values.rows(), "train_node: row count mismatch");
  require(opt.epochs >= 1, "train_node: epochs must be at least 1");
  const int n = node_values.rows();
  const int d = model.dim;
  const int T = model.schedule.T;

  AdamState adam = make_adam_state(model.net, opt.learning_rate);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  std::vector<double> epoch_losses;
  epoch_losses.reserve(opt.epochs);
  MlpTape tape;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fisher-Yates reshuffle each epoch
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(rng.uniform_int(0, i))]);

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += opt.batch_size) {
      const int b = std::min(opt.batch_size, n - start);
      Matrix input(b, model.input_dim());
      Matrix eps(b, d);
      for (int r = 0; r < b; ++r) {
        const int row = order[start + r];
        const int t = static_cast<int>(rng.uniform_int(1, T));
        const double sa = std::sqrt(model.schedule.alpha(t));
        const double sn = std::sqrt(1.0 - model.schedule.alpha(t));
        double* in = input.row(r);
        for (int j = 0; j < d; ++j) {
          eps(r, j) = rng.normal();
          in[j] = sa * node_values(row, j) + sn * eps(r, j);
        }
        for (int j = 0; j < model.parent_dim; ++j) in[d + j] = parent_values(row, j);
        in[d + model.parent_dim] = static_cast<double>(t) / T;
      }
      const Matrix out = mlp_forward_tape(model.net, input, tape);
      Matrix upstream(b, d);
      double batch_loss = 0.0;
      for (int r = 0; r < b; ++r)
        for (int j = 0; j < d; ++j) {
          const double diff = out(r, j) - eps(r, j);
          batch_loss += diff * diff;
          upstream(r, j) = 2.0 * diff / b;
        }
      if (!std::isfinite(batch_loss))
        throw Error("train_node: non-finite loss at node " + std::to_string(model.node + 1) +
                    ", epoch " + std::to_string(epoch + 1));
      loss_sum += batch_loss;
      const MlpGrads grads = mlp_grad_batch(model.net, tape, upstream);
      adam_step(adam, model.net, grads);
    }
    epoch_losses.push_back(loss_sum / n);
  }
  return epoch_losses;
}

namespace {

Matrix eps_input(const DiffusionNodeModel& model, const Matrix& state, const Matrix& parents,
                 double time_frac) {
  Matrix in(state.rows(), model.input_dim());
  for (int r = 0; r < state.rows(); ++r) {
    double* row = in.row(r);
    for (int j = 0; j < model.dim; ++j) row[j] = state(r, j);
    for (int j = 0; j < model.parent_dim; ++j) row[model.dim + j] = parents(r, j);
    row[model.dim + model.parent_dim] = time_frac;
  }
  return in;
}

}  // namespace

Matrix encode_batch(const DiffusionNodeModel& model, const Matrix& x, const Matrix& parents) {
  require(x.cols() == model.dim && parents.cols() == model.parent_dim &&
              x.rows() == parents.rows(),
          "encode: shape mismatch");
  const NoiseSchedule& s = model.schedule;
  Matrix z = x;
  for (int t = 0; t <= s.T - 1; ++t) {
    const double a_t = s.alpha(t), a_next = s.alpha(t + 1);
    const double carry = std::sqrt(a_next / a_t);
    const double coef = std::sqrt(1.0 - a_next) - std::sqrt(a_next * (1.0 - a_t) / a_t);
    const Matrix eps = mlp_apply_batch(model.net, eps_input(model, z, parents,
                                                            static_cast<double>(t) / s.T));
    for (int r = 0; r < z.rows(); ++r)
      for (int j = 0; j < model.dim; ++j) z(r, j) = carry * z(r, j) + coef * eps(r, j);
  }
  return z;
}

Matrix decode_batch(const DiffusionNodeModel& model, const Matrix& z, const Matrix& parents) {
  require(z.cols() == model.dim && parents.cols() == model.parent_dim &&
              z.rows() == parents.rows(),
          "decode: shape mismatch");
  const NoiseSchedule& s = model.schedule;
  Matrix x = z;
  for (int t = s.T; t >= 1; --t) {
    const double a_t = s.alpha(t), a_prev = s.alpha(t - 1);
    const double carry = std::sqrt(a_prev / a_t);
    const double coef = std::sqrt(a_prev * (1.0 - a_t) / a_t) - std::sqrt(1.0 - a_prev);
    const Matrix eps = mlp_apply_batch(model.net, eps_input(model, x, parents,
                                                            static_cast<double>(t) / s.T));
    for (int r = 0; r < x.rows(); ++r)
      for (int j = 0; j < model.dim; ++j) x(r, j) = carry * x(r, j) - coef * eps(r, j);
  }
  return x;
}

Vector encode(const DiffusionNodeModel& model, const Vector& x, const Vector& parents) {
  Matrix xm(1, static_cast<int>(x.size()));
  xm.set_row(0, x);
  Matrix pm(1, static_cast<int>(parents.size()));
  if (!parents.empty()) pm.set_row(0, parents);
  return encode_batch(model, xm, pm).row_vec(0);
}

Vector decode(const DiffusionNodeModel& model, const Vector& z, const Vector& parents) {
  Matrix zm(1, static_cast<int>(z.size()));
  zm.set_row(0, z);
  Matrix pm(1, static_cast<int>(parents.size()));
  if (!parents.empty()) pm.set_row(0, parents);
  return decode_batch(model, zm, pm).row_vec(0);
}

nlohmann::json node_model_to_json(const DiffusionNodeModel& model) {
  return {{"node", model.node + 1},
          {"dim", model.dim},
          {"parent_dim", model.parent_dim},
          {"schedule",
           {{"T", model.schedule.T},
            {"betas", model.schedule.betas}}},
          {"net", mlp_to_json(model.net)}};
}

DiffusionNodeModel node_model_from_json(const nlohmann::json& j) {
  DiffusionNodeModel m;
  m.node = j.at("node").get<int>() - 1;
  m.dim = j.at("dim").get<int>();
  m.parent_dim = j.at("parent_dim").get<int>();
  m.schedule.T = j.at("schedule").at("T").get<int>();
  m.schedule.betas = j.at("schedule").at("betas").get<std::vector<double>>();
  m.schedule.alphas.resize(m.schedule.T);
  double prod = 1.0;
  for (int t = 0; t < m.schedule.T; ++t) {
    prod *= 1.0 - m.schedule.betas[t];
    m.schedule.alphas[t] = prod;
  }
  m.net = mlp_from_json(j.at("net"));
  return m;
}

}  // namespace dcm
