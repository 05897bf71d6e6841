#ifndef KSRL_POLICY_HPP
#define KSRL_POLICY_HPP

#include <span>
#include <string>
#include <vector>

#include "ksrl/mat.hpp"
#include "ksrl/nn.hpp"
#include "ksrl/rng.hpp"

namespace ksrl {

// Diagonal-Gaussian policy: a ~ N(mu(s), diag(sigma)^2) with a state
// independent learnable log_std vector. The mean head squashes the network
// output through a_max * tanh(.) so means always respect the action bounds;
// samples are clamped to the bounds and log densities are evaluated at the
// clamped (stored) action so old/new log-prob ratios are exact on buffered
// data. Knockoff copies are fresh draws from the same conditional
// distribution with identical clamping, which keeps the swap property intact
// on everything that reaches the selection buffer.
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianPolicy() = default;

  static GaussianPolicy create(int state_dim, int action_dim,
                               const std::vector<int>& hidden, Activation act,
                               double action_bound, Rng& rng,
                               double init_log_std = -0.5);

  int state_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return mean_net_.output_dim(); }
  double action_bound() const { return action_bound_; }

  // Squashed, bound-respecting mean action (the greedy evaluation action).
  Vec mean_action(std::span<const double> s) const;

  struct Sample {
    Vec action;                  // clamped draw
    Vec log_prob_components;     // per-dimension log N(a_j; mu_j, sigma_j)
  };
  Sample sample(std::span<const double> s, Rng& rng) const;

  // Independent fresh draw from pi(.|s); same clamping as sample().
  Vec resample_knockoff(std::span<const double> s, Rng& rng) const;

  // Per-dimension Gaussian log densities of an arbitrary action.
  Vec log_prob_components(std::span<const double> s, std::span<const double> a) const;

  // Raw mean-net output plus the squashed mean; used by the PPO update to
  // backpropagate through the tanh squash.
  struct MeanEval {
    Vec raw;
    Vec mean;
    Mlp::Trace trace;
  };
  MeanEval eval_mean(std::span<const double> s) const;

  Vec sigma() const;  // exp(log_std), clamped

  const Mlp& mean_net() const { return mean_net_; }
  Mlp& mean_net() { return mean_net_; }
  const Vec& log_std() const { return log_std_; }
  Vec& log_std() { return log_std_; }
  void clamp_log_std();

  // Flat parameters: mean-net params followed by log_std.
  size_t param_count() const { return mean_net_.param_count() + log_std_.size(); }
  Vec get_params() const;
  void set_params(std::span<const double> flat);

  void save(const std::string& path) const;
  static GaussianPolicy load(const std::string& path);

 private:
  Mlp mean_net_;
  Vec log_std_;
  double action_bound_ = 1.0;
};

// Binary hard mask over action dimensions plus selection provenance.
struct SelectionMask {
  Vec m;                        // entries in {0,1}; m[i]=1 iff action i selected
  std::vector<int> vote_counts; // per-action fold votes (empty when synthetic)
  Vec w_stats;                  // W vector of the final fold
  double tau = 0.0;             // threshold used by the final fold
  long created_at_step = 0;

  static SelectionMask all_ones(int p);
  static SelectionMask from_indices(const std::vector<int>& selected, int p);

  int dim() const { return static_cast<int>(m.size()); }
  int count() const;
  bool empty_selection() const { return count() == 0; }
  std::vector<int> selected_indices() const;
  std::string describe() const;  // "all", or comma-separated indices
};

void save_mask(const std::string& path, const SelectionMask& mask);
SelectionMask load_mask(const std::string& path);

// m (.) a — the Q-input mask.
Vec mask_action_input(std::span<const double> a, std::span<const double> m);

// m . (log pi(a_1|s), ..., log pi(a_p|s)) — masked dimensions contribute zero.
double mask_log_prob(std::span<const double> per_dim_log_probs,
                     std::span<const double> m);

// Keeps off-diagonal (i,j) iff m_i = m_j = 1 (i != j); the diagonal is always
// kept, so non-selected actions become independent while the covariance
// structure of the selected block is untouched. Throws on asymmetric input.
Mat mask_covariance(const Mat& sigma, std::span<const double> m);

// Wrapper routing the log-prob path through mask_log_prob and the Q-input
// path through mask_action_input. The wrapped policy is untouched.
struct MaskedPolicy {
  const GaussianPolicy* policy = nullptr;
  SelectionMask mask;
  bool fell_back_to_all_ones = false;

  double masked_log_prob(std::span<const double> s, std::span<const double> a) const;
  Vec masked_action_input(std::span<const double> a) const;
};

// An all-zero mask would make the policy degenerate: refuse it, substitute
// all-ones and flag the fallback.
MaskedPolicy apply_mask(const GaussianPolicy& policy, SelectionMask mask);

// State-action value net behind the Eq.-style input mask: q(s, m (.) a).
struct MaskedQ {
  const Mlp* q_net = nullptr;  // input width = state_dim + action_dim
  SelectionMask mask;

  double value(std::span<const double> s, std::span<const double> a) const;
  // gradient of value w.r.t. the raw action (before masking)
  Vec action_gradient(std::span<const double> s, std::span<const double> a) const;
};

// Full-covariance Gaussian; only the distribution math needed by the
// covariance-masking extension, not a trainable policy.
struct CorrelatedGaussian {
  Vec mean;
  Mat cov;

  double log_density(std::span<const double> x) const;
  // Selected block contributes its joint density under the masked covariance;
  // masked dimensions contribute zero, mirroring the diagonal case.
  double masked_log_density(std::span<const double> x, std::span<const double> m) const;
};

}  // namespace ksrl

#endif  // KSRL_POLICY_HPP
