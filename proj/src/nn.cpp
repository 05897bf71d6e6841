#include "ksrl/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ksrl {

std::string activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

inline double act_eval(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// derivative expressed from the pre-activation z and activation value y
inline double act_deriv(Activation a, double z, double y) {
  return a == Activation::Tanh ? 1.0 - y * y : (z > 0.0 ? 1.0 : 0.0);
}

// Orthogonal init: QR of a seeded Gaussian matrix, scaled by gain.
Mat orthogonal_matrix(int out, int in, double gain, Rng& rng) {
  const int big = std::max(out, in);
  const int small = std::min(out, in);
  Eigen::MatrixXd g(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Fix the sign convention so the result is deterministic across Eigen builds.
  Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (int j = 0; j < small; ++j)
    if (d(j) < 0.0) q.col(j) *= -1.0;

  Mat w(out, in);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < in; ++j)
      w(i, j) = gain * (out >= in ? q(i, j) : q(j, i));
  return w;
}

}  // namespace

Mlp Mlp::create(const std::vector<int>& sizes, Activation act, Rng& rng,
                double final_gain) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least in/out sizes");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");

  Mlp net;
  net.layer_sizes_ = sizes;
  net.activation_ = act;
  const int n_layers = static_cast<int>(sizes.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const bool last = (l == n_layers - 1);
    const double gain = last ? final_gain : std::sqrt(2.0);
    net.weights_.push_back(orthogonal_matrix(sizes[l + 1], sizes[l], gain, rng));
    net.biases_.emplace_back(sizes[l + 1], 0.0);
  }
  return net;
}

Vec Mlp::forward(std::span<const double> x) const {
  Trace trace;
  return forward(x, trace);
}

Vec Mlp::forward(std::span<const double> x, Trace& trace) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw std::invalid_argument("Mlp::forward: input width mismatch");

  trace.pre.clear();
  trace.post.clear();
  trace.post.emplace_back(x.begin(), x.end());

  const int n = n_layers();
  for (int l = 0; l < n; ++l) {
    const Mat& w = weights_[l];
    Vec z(w.rows);
    matvec(w, trace.post.back(), z);
    for (int i = 0; i < w.rows; ++i) z[i] += biases_[l][i];
    trace.pre.push_back(z);
    if (l == n - 1) {
      trace.post.push_back(std::move(z));  // linear output layer
    } else {
      Vec y(w.rows);
      for (int i = 0; i < w.rows; ++i) y[i] = act_eval(activation_, z[i]);
      trace.post.push_back(std::move(y));
    }
  }
  return trace.post.back();
}

Mlp::Gradients Mlp::backward(const Trace& trace,
                             std::span<const double> upstream) const {
  if (static_cast<int>(upstream.size()) != output_dim())
    throw std::invalid_argument("Mlp::backward: upstream width mismatch");
  if (trace.post.size() != static_cast<size_t>(n_layers()) + 1)
    throw std::invalid_argument("Mlp::backward: trace does not match network");

  Gradients g = zero_gradients();
  const int n = n_layers();
  Vec delta(upstream.begin(), upstream.end());  // dL/d(pre-activation of layer l)

  for (int l = n - 1; l >= 0; --l) {
    if (l != n - 1) {
      // push delta through the activation of layer l
      for (int i = 0; i < static_cast<int>(delta.size()); ++i)
        delta[i] *= act_deriv(activation_, trace.pre[l][i], trace.post[l + 1][i]);
    }
    const Vec& input = trace.post[l];
    Mat& dw = g.d_weights[l];
    for (int i = 0; i < dw.rows; ++i) {
      const double di = delta[i];
      double* dw_row = dw.row(i);
      for (int j = 0; j < dw.cols; ++j) dw_row[j] = di * input[j];
      g.d_biases[l][i] = di;
    }
    // propagate to the layer input
    const Mat& w = weights_[l];
    Vec next(w.cols, 0.0);
    for (int i = 0; i < w.rows; ++i) {
      const double di = delta[i];
      const double* w_row = w.row(i);
      for (int j = 0; j < w.cols; ++j) next[j] += di * w_row[j];
    }
    delta = std::move(next);
  }
  g.d_input = std::move(delta);
  return g;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (int l = 0; l < n_layers(); ++l) {
    g.d_weights.emplace_back(weights_[l].rows, weights_[l].cols, 0.0);
    g.d_biases.emplace_back(biases_[l].size(), 0.0);
  }
  g.d_input.assign(input_dim(), 0.0);
  return g;
}

void Mlp::accumulate(Gradients& acc, const Gradients& g) {
  for (size_t l = 0; l < acc.d_weights.size(); ++l) {
    for (size_t i = 0; i < acc.d_weights[l].data.size(); ++i)
      acc.d_weights[l].data[i] += g.d_weights[l].data[i];
    for (size_t i = 0; i < acc.d_biases[l].size(); ++i)
      acc.d_biases[l][i] += g.d_biases[l][i];
  }
}

void Mlp::scale(Gradients& g, double factor) {
  for (auto& w : g.d_weights)
    for (double& v : w.data) v *= factor;
  for (auto& b : g.d_biases)
    for (double& v : b) v *= factor;
}

Vec Mlp::Gradients::flatten() const {
  Vec flat;
  for (size_t l = 0; l < d_weights.size(); ++l) {
    flat.insert(flat.end(), d_weights[l].data.begin(), d_weights[l].data.end());
    flat.insert(flat.end(), d_biases[l].begin(), d_biases[l].end());
  }
  return flat;
}

size_t Mlp::param_count() const {
  size_t n = 0;
  for (int l = 0; l < n_layers(); ++l)
    n += weights_[l].data.size() + biases_[l].size();
  return n;
}

Vec Mlp::get_params() const {
  Vec flat;
  flat.reserve(param_count());
  for (int l = 0; l < n_layers(); ++l) {
    flat.insert(flat.end(), weights_[l].data.begin(), weights_[l].data.end());
    flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
  }
  return flat;
}

void Mlp::set_params(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("Mlp::set_params: size mismatch");
  size_t k = 0;
  for (int l = 0; l < n_layers(); ++l) {
    for (double& v : weights_[l].data) v = flat[k++];
    for (double& v : biases_[l]) v = flat[k++];
  }
}

bool Mlp::params_finite() const {
  for (int l = 0; l < n_layers(); ++l) {
    if (!all_finite(weights_[l].data)) return false;
    if (!all_finite(biases_[l])) return false;
  }
  return true;
}

AdamState make_adam(size_t n_params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.assign(n_params, 0.0);
  s.v.assign(n_params, 0.0);
  return s;
}

void adam_step(AdamState& state, Vec& params, std::span<const double> grads) {
  if (params.size() != state.m.size() || grads.size() != state.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  if (!all_finite(grads))
    throw std::invalid_argument("adam_step: non-finite gradient, update rejected");

  state.step += 1;
  const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / b1t;
    const double v_hat = state.v[i] / b2t;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  if (!all_finite(params))
    throw std::runtime_error("adam_step: parameters became non-finite");
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  const double norm = l2norm({grads.data(), grads.size()});
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void save_mlp(const std::string& path, const Mlp& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  out << "ksrl-mlp v1\n";
  out << "activation " << activation_name(net.activation()) << "\n";
  out << "layers";
  for (int s : net.layer_sizes()) out << " " << s;
  out << "\n";
  char buf[64];
  for (double v : net.get_params()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ksrl-mlp v1")
    throw std::runtime_error("load_mlp: bad or unsupported header in " + path);

  std::string key, act_name;
  in >> key >> act_name;
  if (key != "activation") throw std::runtime_error("load_mlp: missing activation");
  in >> key;
  if (key != "layers") throw std::runtime_error("load_mlp: missing layers");
  std::getline(in, line);
  std::istringstream ls(line);
  std::vector<int> sizes;
  int s;
  while (ls >> s) sizes.push_back(s);
  if (sizes.size() < 2) throw std::runtime_error("load_mlp: bad layer list");

  Rng rng(0);  // placeholder init, immediately overwritten
  Mlp net = Mlp::create(sizes, activation_from_name(act_name), rng);
  Vec params(net.param_count());
  for (double& v : params)
    if (!(in >> v)) throw std::runtime_error("load_mlp: truncated parameter block");
  net.set_params(params);
  return net;
}

}  // namespace ksrl
