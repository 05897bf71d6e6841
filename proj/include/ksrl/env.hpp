#ifndef KSRL_ENV_HPP
#define KSRL_ENV_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ksrl/mat.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

// Linear-Gaussian MDP with a quadratic cost and a known influential action
// set G. Dynamics and reward read only the coordinates of the action indexed
// by G, so every other action dimension is redundant by construction:
//
//   s' = A s + B a[G] + noise_scale * eps,   eps ~ N(0, I)
//   r  = -|s|^2 - action_cost * |a[G]|^2
//
// A has spectral radius < 1 (checked at construction) and B is generated with
// singular values in [0.5, 1.5] so every true action carries signal.
struct EnvSpec {
  int state_dim = 4;
  int action_dim = 54;             // p
  std::vector<int> true_set;       // G, sorted, 0-based
  Mat A;                           // state_dim x state_dim
  Mat B;                           // state_dim x |G|
  double noise_scale = 0.05;
  double action_cost = 0.01;
  int horizon = 100;               // T_ep
  double action_bound = 1.0;       // actions live in [-a_max, a_max]^p
  uint64_t seed = 0;               // construction seed, kept for replayability
  std::string name = "default";

  // d_s=4, |G|=4, p=54, T_ep=100, sigma_w=0.05, c=0.01, a_max=1.
  static EnvSpec make_default(uint64_t seed = 1);

  // |G| = raw_dims true actions (indices 0..raw-1) plus extra_dims dummies.
  static EnvSpec make_padded(int raw_dims, int extra_dims, uint64_t seed = 1);

  // Arbitrary true-index placement; dynamics generated from the seed.
  static EnvSpec make_custom(int state_dim, int action_dim,
                             const std::vector<int>& true_set, uint64_t seed = 1);

  const std::vector<int>& ground_truth_set() const { return true_set; }

  // Throws std::invalid_argument if any structural invariant is violated
  // (G out of range or duplicated, shape mismatches, spectral radius >= 1).
  void validate() const;

  double spectral_radius_a() const;
};

std::string env_spec_to_json(const EnvSpec& spec);
EnvSpec env_spec_from_json(const std::string& text);
void save_env_spec(const std::string& path, const EnvSpec& spec);
EnvSpec load_env_spec(const std::string& path);

// One buffered step. a_knockoff is empty when knockoff storage is off.
struct Transition {
  Vec s;
  Vec a;
  Vec a_knockoff;
  double r = 0.0;
  Vec s_next;
  int t = 0;           // step index within the episode
  int episode_id = 0;

  bool has_knockoff() const { return !a_knockoff.empty(); }
};

struct StepResult {
  Vec s_next;
  double r = 0.0;
  bool done = false;
};

// Deterministic dynamics kernel with the noise draw injected by the caller;
// lets tests perturb redundant coordinates under a fixed noise realization.
// Clamps a to the action bounds. Throws on non-finite actions.
void step_dynamics(const EnvSpec& spec, std::span<const double> s,
                   std::span<const double> a, std::span<const double> noise,
                   Vec& s_next, double& r);

// Stateful environment instance: owns its RNG and episode clock.
class Env {
 public:
  Env(EnvSpec spec, uint64_t seed);

  const EnvSpec& spec() const { return spec_; }

  // Initial state uniform on [-1,1]^{d_s}; resets the episode clock.
  Vec reset();

  StepResult step(std::span<const double> a);

  const Vec& state() const { return state_; }
  int episode_step() const { return t_; }
  int episode_id() const { return episode_; }

 private:
  EnvSpec spec_;
  Rng rng_;
  Vec state_;
  int t_ = 0;
  int episode_ = -1;
};

}  // namespace ksrl

#endif  // KSRL_ENV_HPP
