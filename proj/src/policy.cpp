#include "ksrl/policy.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ksrl {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)
}

GaussianPolicy GaussianPolicy::create(int state_dim, int action_dim,
                                      const std::vector<int>& hidden,
                                      Activation act, double action_bound,
                                      Rng& rng, double init_log_std) {
  GaussianPolicy pol;
  std::vector<int> sizes;
  sizes.push_back(state_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  // small final gain keeps initial means near zero
  pol.mean_net_ = Mlp::create(sizes, act, rng, 0.01);
  pol.log_std_.assign(action_dim, init_log_std);
  pol.action_bound_ = action_bound;
  pol.clamp_log_std();
  return pol;
}

void GaussianPolicy::clamp_log_std() {
  for (double& v : log_std_) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

Vec GaussianPolicy::sigma() const {
  Vec s(log_std_.size());
  for (size_t i = 0; i < s.size(); ++i)
    s[i] = std::exp(std::clamp(log_std_[i], kLogStdMin, kLogStdMax));
  return s;
}

GaussianPolicy::MeanEval GaussianPolicy::eval_mean(std::span<const double> s) const {
  MeanEval ev;
  ev.raw = mean_net_.forward(s, ev.trace);
  if (!all_finite(ev.raw))
    throw std::runtime_error("GaussianPolicy: non-finite network output");
  ev.mean.resize(ev.raw.size());
  for (size_t i = 0; i < ev.raw.size(); ++i)
    ev.mean[i] = action_bound_ * std::tanh(ev.raw[i]);
  return ev;
}

Vec GaussianPolicy::mean_action(std::span<const double> s) const {
  return eval_mean(s).mean;
}

GaussianPolicy::Sample GaussianPolicy::sample(std::span<const double> s,
                                              Rng& rng) const {
  const Vec mu = mean_action(s);
  const Vec sig = sigma();
  Sample out;
  out.action.resize(mu.size());
  out.log_prob_components.resize(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) {
    double a = mu[j] + sig[j] * rng.gaussian();
    a = std::clamp(a, -action_bound_, action_bound_);
    out.action[j] = a;
    const double z = (a - mu[j]) / sig[j];
    out.log_prob_components[j] = -0.5 * z * z - std::log(sig[j]) - kHalfLog2Pi;
  }
  return out;
}

Vec GaussianPolicy::resample_knockoff(std::span<const double> s, Rng& rng) const {
  return sample(s, rng).action;
}

Vec GaussianPolicy::log_prob_components(std::span<const double> s,
                                        std::span<const double> a) const {
  if (a.size() != static_cast<size_t>(action_dim()))
    throw std::invalid_argument("log_prob_components: action width mismatch");
  const Vec mu = mean_action(s);
  const Vec sig = sigma();
  Vec lp(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) {
    const double z = (a[j] - mu[j]) / sig[j];
    lp[j] = -0.5 * z * z - std::log(sig[j]) - kHalfLog2Pi;
  }
  return lp;
}

Vec GaussianPolicy::get_params() const {
  Vec flat = mean_net_.get_params();
  flat.insert(flat.end(), log_std_.begin(), log_std_.end());
  return flat;
}

void GaussianPolicy::set_params(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("GaussianPolicy::set_params: size mismatch");
  const size_t n_net = mean_net_.param_count();
  mean_net_.set_params(flat.subspan(0, n_net));
  for (size_t i = 0; i < log_std_.size(); ++i) log_std_[i] = flat[n_net + i];
  clamp_log_std();
}

void GaussianPolicy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("GaussianPolicy::save: cannot open " + path);
  out << "ksrl-policy v1\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", action_bound_);
  out << "action_bound " << buf << "\n";
  out << "log_std";
  for (double v : log_std_) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << " " << buf;
  }
  out << "\n";
  out << "activation " << activation_name(mean_net_.activation()) << "\n";
  out << "layers";
  for (int s : mean_net_.layer_sizes()) out << " " << s;
  out << "\n";
  for (double v : mean_net_.get_params()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << "\n";
  }
}

GaussianPolicy GaussianPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("GaussianPolicy::load: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ksrl-policy v1")
    throw std::runtime_error("GaussianPolicy::load: bad header in " + path);

  GaussianPolicy pol;
  std::string key;
  in >> key >> pol.action_bound_;
  if (key != "action_bound") throw std::runtime_error("policy load: missing action_bound");
  in >> key;
  if (key != "log_std") throw std::runtime_error("policy load: missing log_std");
  std::getline(in, line);
  std::istringstream ls(line);
  double v;
  while (ls >> v) pol.log_std_.push_back(v);

  std::string act_name;
  in >> key >> act_name;
  if (key != "activation") throw std::runtime_error("policy load: missing activation");
  in >> key;
  std::getline(in, line);
  std::istringstream sizes_in(line);
  std::vector<int> sizes;
  int s;
  while (sizes_in >> s) sizes.push_back(s);

  Rng rng(0);
  pol.mean_net_ = Mlp::create(sizes, activation_from_name(act_name), rng);
  Vec params(pol.mean_net_.param_count());
  for (double& p : params)
    if (!(in >> p)) throw std::runtime_error("policy load: truncated parameters");
  pol.mean_net_.set_params(params);
  pol.clamp_log_std();
  return pol;
}

// --- SelectionMask ---

SelectionMask SelectionMask::all_ones(int p) {
  SelectionMask mask;
  mask.m.assign(p, 1.0);
  return mask;
}

SelectionMask SelectionMask::from_indices(const std::vector<int>& selected, int p) {
  SelectionMask mask;
  mask.m.assign(p, 0.0);
  for (int idx : selected) {
    if (idx < 0 || idx >= p)
      throw std::invalid_argument("SelectionMask: index out of range");
    mask.m[idx] = 1.0;
  }
  return mask;
}

int SelectionMask::count() const {
  int c = 0;
  for (double v : m) c += (v != 0.0);
  return c;
}

std::vector<int> SelectionMask::selected_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < dim(); ++i)
    if (m[i] != 0.0) idx.push_back(i);
  return idx;
}

std::string SelectionMask::describe() const {
  if (count() == dim()) return "all";
  std::string s;
  for (int i : selected_indices()) {
    if (!s.empty()) s += ",";
    s += std::to_string(i);
  }
  return s.empty() ? "none" : s;
}

void save_mask(const std::string& path, const SelectionMask& mask) {
  nlohmann::json j;
  j["selected"] = mask.selected_indices();
  j["p"] = mask.dim();
  j["vote_counts"] = mask.vote_counts;
  j["w_stats"] = mask.w_stats;
  j["tau"] = std::isfinite(mask.tau) ? nlohmann::json(mask.tau) : nlohmann::json("inf");
  j["created_at_step"] = mask.created_at_step;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mask: cannot open " + path);
  out << j.dump(2) << "\n";
}

SelectionMask load_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mask: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  SelectionMask mask = SelectionMask::from_indices(
      j.at("selected").get<std::vector<int>>(), j.at("p").get<int>());
  mask.vote_counts = j.value("vote_counts", std::vector<int>{});
  mask.w_stats = j.value("w_stats", Vec{});
  if (j.at("tau").is_string())
    mask.tau = std::numeric_limits<double>::infinity();
  else
    mask.tau = j.at("tau").get<double>();
  mask.created_at_step = j.value("created_at_step", 0L);
  return mask;
}

// --- mask operations ---

Vec mask_action_input(std::span<const double> a, std::span<const double> m) {
  if (a.size() != m.size())
    throw std::invalid_argument("mask_action_input: length mismatch");
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = m[i] * a[i];
  return out;
}

double mask_log_prob(std::span<const double> per_dim_log_probs,
                     std::span<const double> m) {
  if (per_dim_log_probs.size() != m.size())
    throw std::invalid_argument("mask_log_prob: length mismatch");
  return dot(m, per_dim_log_probs);
}

Mat mask_covariance(const Mat& sigma, std::span<const double> m) {
  if (sigma.rows != sigma.cols)
    throw std::invalid_argument("mask_covariance: matrix not square");
  if (m.size() != static_cast<size_t>(sigma.rows))
    throw std::invalid_argument("mask_covariance: mask length mismatch");
  for (int i = 0; i < sigma.rows; ++i)
    for (int j = i + 1; j < sigma.cols; ++j)
      if (sigma(i, j) != sigma(j, i))
        throw std::invalid_argument("mask_covariance: matrix not symmetric");

  Mat out = sigma;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j)
      if (i != j && (m[i] == 0.0 || m[j] == 0.0)) out(i, j) = 0.0;
  return out;
}

double MaskedPolicy::masked_log_prob(std::span<const double> s,
                                     std::span<const double> a) const {
  return mask_log_prob(policy->log_prob_components(s, a), mask.m);
}

Vec MaskedPolicy::masked_action_input(std::span<const double> a) const {
  return mask_action_input(a, mask.m);
}

MaskedPolicy apply_mask(const GaussianPolicy& policy, SelectionMask mask) {
  if (mask.dim() != policy.action_dim())
    throw std::invalid_argument("apply_mask: mask length mismatch");
  MaskedPolicy wrapped;
  wrapped.policy = &policy;
  if (mask.empty_selection()) {
    std::fprintf(stderr,
                 "[warn] apply_mask: empty selection set, falling back to the "
                 "all-ones mask\n");
    SelectionMask fallback = SelectionMask::all_ones(mask.dim());
    fallback.vote_counts = mask.vote_counts;
    fallback.w_stats = mask.w_stats;
    fallback.tau = mask.tau;
    fallback.created_at_step = mask.created_at_step;
    wrapped.mask = std::move(fallback);
    wrapped.fell_back_to_all_ones = true;
  } else {
    wrapped.mask = std::move(mask);
  }
  return wrapped;
}

double MaskedQ::value(std::span<const double> s, std::span<const double> a) const {
  const Vec ma = mask_action_input(a, mask.m);
  Vec input(s.begin(), s.end());
  input.insert(input.end(), ma.begin(), ma.end());
  return q_net->forward(input)[0];
}

Vec MaskedQ::action_gradient(std::span<const double> s,
                             std::span<const double> a) const {
  const Vec ma = mask_action_input(a, mask.m);
  Vec input(s.begin(), s.end());
  input.insert(input.end(), ma.begin(), ma.end());
  Mlp::Trace trace;
  q_net->forward(input, trace);
  Vec upstream{1.0};
  Mlp::Gradients g = q_net->backward(trace, upstream);
  // chain through the input mask: d(m_j * a_j)/d a_j = m_j
  Vec da(a.size());
  for (size_t j = 0; j < a.size(); ++j)
    da[j] = mask.m[j] * g.d_input[s.size() + j];
  return da;
}

// --- correlated Gaussian ---

double CorrelatedGaussian::log_density(std::span<const double> x) const {
  const int p = static_cast<int>(mean.size());
  if (static_cast<int>(x.size()) != p || cov.rows != p || cov.cols != p)
    throw std::invalid_argument("CorrelatedGaussian: dimension mismatch");

  Eigen::MatrixXd s(p, p);
  Eigen::VectorXd d(p);
  for (int i = 0; i < p; ++i) {
    d(i) = x[i] - mean[i];
    for (int j = 0; j < p; ++j) s(i, j) = cov(i, j);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("CorrelatedGaussian: covariance not PD");
  const Eigen::VectorXd z = llt.matrixL().solve(d);
  double log_det = 0.0;
  for (int i = 0; i < p; ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * z.squaredNorm() - log_det - p * kHalfLog2Pi;
}

double CorrelatedGaussian::masked_log_density(std::span<const double> x,
                                              std::span<const double> m) const {
  const int p = static_cast<int>(mean.size());
  if (static_cast<int>(m.size()) != p)
    throw std::invalid_argument("masked_log_density: mask length mismatch");

  std::vector<int> sel;
  for (int i = 0; i < p; ++i)
    if (m[i] != 0.0) sel.push_back(i);
  if (sel.empty()) return 0.0;

  CorrelatedGaussian sub;
  sub.mean.resize(sel.size());
  sub.cov = Mat(static_cast<int>(sel.size()), static_cast<int>(sel.size()));
  Vec xs(sel.size());
  for (size_t i = 0; i < sel.size(); ++i) {
    sub.mean[i] = mean[sel[i]];
    xs[i] = x[sel[i]];
    for (size_t j = 0; j < sel.size(); ++j)
      sub.cov(static_cast<int>(i), static_cast<int>(j)) = cov(sel[i], sel[j]);
  }
  return sub.log_density(xs);
}

}  // namespace ksrl
