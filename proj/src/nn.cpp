#include "dcm/nn.hpp"

#include <cmath>

#include "dcm/kernels.hpp"

namespace dcm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void silu_inplace(Matrix& z) {
#pragma omp parallel for schedule(static) if(z.rows() > 8)
  for (int i = 0; i < z.rows(); ++i) {
    double* row = z.row(i);
    for (int j = 0; j < z.cols(); ++j) row[j] *= sigmoid(row[j]);
  }
}

// d/dx silu(x) = s(x) (1 + x (1 - s(x)))
void silu_backward_inplace(Matrix& delta, const Matrix& pre) {
#pragma omp parallel for schedule(static) if(delta.rows() > 8)
  for (int i = 0; i < delta.rows(); ++i) {
    double* d = delta.row(i);
    const double* z = pre.row(i);
    for (int j = 0; j < delta.cols(); ++j) {
      const double s = sigmoid(z[j]);
      d[j] *= s * (1.0 + z[j] * (1.0 - s));
    }
  }
}

}  // namespace

Vector silu(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid(x[i]);
  return out;
}

Mlp make_mlp(const std::vector<int>& layer_sizes, Rng& rng) {
  require(layer_sizes.size() >= 2, "make_mlp: need at least input and output sizes");
  Mlp net;
  net.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
    require(fan_in > 0 && fan_out > 0, "make_mlp: layer sizes must be positive");
    Matrix w(fan_in, fan_out);
    const double bound = std::sqrt(1.0 / fan_in);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

Matrix mlp_forward_tape(const Mlp& net, const Matrix& input, MlpTape& tape) {
  if (input.cols() != net.input_dim()) throw ShapeError("mlp: input width mismatch");
  tape.pre.clear();
  tape.post.clear();
  tape.post.push_back(input);
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix z(tape.post.back().rows(), net.layer_sizes[l + 1]);
    kernels::matmul_nn(tape.post.back(), net.weights[l], z);
    kernels::add_row_inplace(z, net.biases[l]);
    tape.pre.push_back(z);
    if (l + 1 < net.num_layers()) silu_inplace(z);
    tape.post.push_back(std::move(z));
  }
  return tape.post.back();
}

Matrix mlp_apply_batch(const Mlp& net, const Matrix& input) {
  if (input.cols() != net.input_dim()) throw ShapeError("mlp: input width mismatch");
  Matrix act = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix z(act.rows(), net.layer_sizes[l + 1]);
    kernels::matmul_nn(act, net.weights[l], z);
    kernels::add_row_inplace(z, net.biases[l]);
    if (l + 1 < net.num_layers()) silu_inplace(z);
    act = std::move(z);
  }
  return act;
}

Vector mlp_apply(const Mlp& net, const Vector& input) {
  if (static_cast<int>(input.size()) != net.input_dim())
    throw ShapeError("mlp: input width mismatch");
  Vector act = input;
  Vector next;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights[l];
    const int out = w.cols();
    next.assign(net.biases[l].begin(), net.biases[l].end());
    for (int i = 0; i < w.rows(); ++i) {
      const double a = act[i];
      const double* wr = w.row(i);
      for (int j = 0; j < out; ++j) next[j] += a * wr[j];
    }
    if (l + 1 < net.num_layers())
      for (double& v : next) v *= sigmoid(v);
    act.swap(next);
  }
  return act;
}

MlpGrads mlp_grad_batch(const Mlp& net, const MlpTape& tape, const Matrix& upstream) {
  const int L = net.num_layers();
  if (upstream.cols() != net.output_dim() || upstream.rows() != tape.post[0].rows())
    throw ShapeError("mlp_grad: upstream shape mismatch");
  MlpGrads g;
  g.d_weights.resize(L);
  g.d_biases.resize(L);
  Matrix delta = upstream;
  for (int l = L - 1; l >= 0; --l) {
    if (l < L - 1) silu_backward_inplace(delta, tape.pre[l]);
    g.d_weights[l] = Matrix(net.weights[l].rows(), net.weights[l].cols());
    kernels::matmul_tn(tape.post[l], delta, g.d_weights[l]);
    Vector db(net.biases[l].size(), 0.0);
    for (int i = 0; i < delta.rows(); ++i) {
      const double* row = delta.row(i);
      for (std::size_t j = 0; j < db.size(); ++j) db[j] += row[j];
    }
    g.d_biases[l] = std::move(db);
    Matrix prev(delta.rows(), net.weights[l].rows());
    kernels::matmul_nt(delta, net.weights[l], prev);
    delta = std::move(prev);
  }
  g.d_input = std::move(delta);
  return g;
}

MlpGrads mlp_grad(const Mlp& net, const Vector& input, const Vector& upstream) {
  Matrix in(1, static_cast<int>(input.size()));
  in.set_row(0, input);
  Matrix up(1, static_cast<int>(upstream.size()));
  up.set_row(0, upstream);
  MlpTape tape;
  mlp_forward_tape(net, in, tape);
  return mlp_grad_batch(net, tape, up);
}

AdamState make_adam_state(const Mlp& net, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  for (const auto& w : net.weights) {
    st.m_weights.emplace_back(w.rows(), w.cols());
    st.v_weights.emplace_back(w.rows(), w.cols());
  }
  for (const auto& b : net.biases) {
    st.m_biases.emplace_back(b.size(), 0.0);
    st.v_biases.emplace_back(b.size(), 0.0);
  }
  return st;
}

namespace {

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 const AdamState& st, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g[i])) throw Error("adam_step: non-finite gradient");
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

}  // namespace

void adam_step(AdamState& state, Mlp& net, const MlpGrads& grads) {
  require(grads.d_weights.size() == net.weights.size() &&
              grads.d_biases.size() == net.biases.size(),
          "adam_step: gradient layout mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l].data(), state.m_weights[l].data(), state.v_weights[l].data(),
                grads.d_weights[l].data(), net.weights[l].size(), state, bc1, bc2);
    adam_update(net.biases[l].data(), state.m_biases[l].data(), state.v_biases[l].data(),
                grads.d_biases[l].data(), net.biases[l].size(), state, bc1, bc2);
  }
}

}  // namespace dcm
