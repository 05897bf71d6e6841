#include "ksrl/env.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ksrl {

namespace {

Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (int j = 0; j < n; ++j)
    if (d(j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) = m(i, j);
  return out;
}

Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
  return out;
}

// B = U diag(sv) V^T with sv uniform in [0.5, 1.5]. When |G| > d_s the matrix
// is wide and column norms are only generically bounded away from zero, so
// resample until every true action has a usable column.
Mat generate_b(int state_dim, int g_size, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::MatrixXd u = random_orthogonal(state_dim, rng);
    Eigen::MatrixXd v = random_orthogonal(g_size, rng);
    const int k = std::min(state_dim, g_size);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(state_dim, g_size);
    for (int i = 0; i < k; ++i) sigma(i, i) = rng.uniform(0.5, 1.5);
    Eigen::MatrixXd b = u * sigma * v.transpose();

    double min_col = b.colwise().norm().minCoeff();
    if (g_size <= state_dim || min_col >= 0.3) return to_mat(b);
  }
  throw std::runtime_error("generate_b: failed to produce usable columns");
}

EnvSpec generate(int state_dim, int action_dim, std::vector<int> true_set,
                 uint64_t seed, const std::string& name) {
  EnvSpec spec;
  spec.state_dim = state_dim;
  spec.action_dim = action_dim;
  spec.true_set = std::move(true_set);
  std::sort(spec.true_set.begin(), spec.true_set.end());
  spec.seed = seed;
  spec.name = name;

  Rng rng(mix_seed(seed, 0xE57));
  // A = 0.9 * orthogonal: spectral radius exactly 0.9 and ||A s|| = 0.9 ||s||.
  Eigen::MatrixXd q = random_orthogonal(state_dim, rng);
  spec.A = to_mat(0.9 * q);
  spec.B = generate_b(state_dim, static_cast<int>(spec.true_set.size()), rng);
  spec.validate();
  return spec;
}

}  // namespace

EnvSpec EnvSpec::make_default(uint64_t seed) {
  return generate(4, 54, {0, 1, 2, 3}, seed, "default");
}

EnvSpec EnvSpec::make_padded(int raw_dims, int extra_dims, uint64_t seed) {
  std::vector<int> g(raw_dims);
  for (int i = 0; i < raw_dims; ++i) g[i] = i;
  return generate(4, raw_dims + extra_dims, g, seed,
                  "padded_" + std::to_string(raw_dims) + "+" + std::to_string(extra_dims));
}

EnvSpec EnvSpec::make_custom(int state_dim, int action_dim,
                             const std::vector<int>& true_set, uint64_t seed) {
  return generate(state_dim, action_dim, true_set, seed, "custom");
}

double EnvSpec::spectral_radius_a() const {
  Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(A), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void EnvSpec::validate() const {
  if (state_dim <= 0 || action_dim <= 0 || horizon <= 0)
    throw std::invalid_argument("EnvSpec: dims and horizon must be positive");
  if (noise_scale < 0.0 || action_cost < 0.0 || action_bound <= 0.0)
    throw std::invalid_argument("EnvSpec: bad scale parameters");
  if (true_set.empty() || true_set.size() > static_cast<size_t>(action_dim))
    throw std::invalid_argument("EnvSpec: |G| must be in [1, p]");
  std::set<int> uniq(true_set.begin(), true_set.end());
  if (uniq.size() != true_set.size())
    throw std::invalid_argument("EnvSpec: duplicate indices in G");
  if (*uniq.begin() < 0 || *uniq.rbegin() >= action_dim)
    throw std::invalid_argument("EnvSpec: G index out of range");
  if (A.rows != state_dim || A.cols != state_dim)
    throw std::invalid_argument("EnvSpec: A shape mismatch");
  if (B.rows != state_dim || B.cols != static_cast<int>(true_set.size()))
    throw std::invalid_argument("EnvSpec: B shape mismatch");
  if (spectral_radius_a() >= 1.0)
    throw std::invalid_argument("EnvSpec: A is not stable (spectral radius >= 1)");
}

void step_dynamics(const EnvSpec& spec, std::span<const double> s,
                   std::span<const double> a, std::span<const double> noise,
                   Vec& s_next, double& r) {
  if (static_cast<int>(s.size()) != spec.state_dim)
    throw std::invalid_argument("step_dynamics: state width mismatch");
  if (static_cast<int>(a.size()) != spec.action_dim)
    throw std::invalid_argument("step_dynamics: action width mismatch");
  if (!all_finite(a)) throw std::invalid_argument("step_dynamics: non-finite action");

  const int g = static_cast<int>(spec.true_set.size());
  Vec a_g(g);
  for (int k = 0; k < g; ++k) {
    double v = a[spec.true_set[k]];
    a_g[k] = std::clamp(v, -spec.action_bound, spec.action_bound);
  }

  s_next.assign(spec.state_dim, 0.0);
  for (int i = 0; i < spec.state_dim; ++i) {
    double acc = dot(spec.A.row_span(i), s);
    acc += dot(spec.B.row_span(i), a_g);
    acc += spec.noise_scale * noise[i];
    s_next[i] = acc;
  }
  r = -norm2sq(s) - spec.action_cost * norm2sq(a_g);
}

Env::Env(EnvSpec spec, uint64_t seed)
    : spec_(std::move(spec)), rng_(seed), state_(spec_.state_dim, 0.0) {
  spec_.validate();
}

Vec Env::reset() {
  episode_ += 1;
  t_ = 0;
  for (double& v : state_) v = rng_.uniform(-1.0, 1.0);
  return state_;
}

StepResult Env::step(std::span<const double> a) {
  StepResult out;
  Vec noise(spec_.state_dim);
  rng_.fill_gaussian(noise);
  step_dynamics(spec_, state_, a, noise, out.s_next, out.r);
  state_ = out.s_next;
  t_ += 1;
  out.done = (t_ == spec_.horizon);
  return out;
}

// --- serialization ---

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

}  // namespace

std::string env_spec_to_json(const EnvSpec& spec) {
  nlohmann::json j;
  j["kind"] = "explicit";
  j["name"] = spec.name;
  j["state_dim"] = spec.state_dim;
  j["action_dim"] = spec.action_dim;
  j["true_set"] = spec.true_set;
  j["A"] = mat_to_json(spec.A);
  j["B"] = mat_to_json(spec.B);
  j["noise_scale"] = spec.noise_scale;
  j["action_cost"] = spec.action_cost;
  j["horizon"] = spec.horizon;
  j["action_bound"] = spec.action_bound;
  j["seed"] = spec.seed;
  return j.dump(2);
}

EnvSpec env_spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const std::string kind = j.value("kind", "explicit");
  const uint64_t seed = j.value("seed", static_cast<uint64_t>(1));

  EnvSpec spec;
  if (kind == "default") {
    spec = EnvSpec::make_default(seed);
  } else if (kind == "padded") {
    spec = EnvSpec::make_padded(j.at("raw_dims").get<int>(),
                                j.at("extra_dims").get<int>(), seed);
  } else if (kind == "explicit") {
    spec.name = j.value("name", "custom");
    spec.state_dim = j.at("state_dim").get<int>();
    spec.action_dim = j.at("action_dim").get<int>();
    spec.true_set = j.at("true_set").get<std::vector<int>>();
    spec.A = mat_from_json(j.at("A"));
    spec.B = mat_from_json(j.at("B"));
    spec.seed = seed;
  } else {
    throw std::invalid_argument("env spec: unknown kind " + kind);
  }

  // scalar overrides apply to generated kinds as well
  if (j.contains("noise_scale")) spec.noise_scale = j.at("noise_scale").get<double>();
  if (j.contains("action_cost")) spec.action_cost = j.at("action_cost").get<double>();
  if (j.contains("horizon")) spec.horizon = j.at("horizon").get<int>();
  if (j.contains("action_bound")) spec.action_bound = j.at("action_bound").get<double>();
  spec.validate();
  return spec;
}

void save_env_spec(const std::string& path, const EnvSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_env_spec: cannot open " + path);
  out << env_spec_to_json(spec) << "\n";
}

EnvSpec load_env_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_env_spec: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return env_spec_from_json(text);
}

}  // namespace ksrl
