#ifndef KSRL_PPO_HPP
#define KSRL_PPO_HPP

#include <optional>
#include <string>
#include <vector>

#include "ksrl/env.hpp"
#include "ksrl/knockoff.hpp"
#include "ksrl/nn.hpp"
#include "ksrl/policy.hpp"

namespace ksrl {

enum class Method { KS, All, True };
std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainConfig {
  double lr_pi = 3e-4;
  double lr_v = 1e-3;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int minibatch = 256;
  int rollout_len = 1000;
  long total_steps = 200000;
  long t_vs = 4000;            // buffered transitions handed to selection
  double alpha = 0.1;          // FDR level
  double vote_gamma = 0.5;     // majority-vote cutoff
  int k_folds = 5;
  int update_epochs = 10;
  uint64_t seed = 0;
  std::vector<int> hidden = {64, 32};
  Activation activation = Activation::Tanh;
  double init_log_std = -0.5;
  double grad_clip = 0.5;
  long eval_every = 2000;
  int eval_episodes = 10;
  Method method = Method::KS;
  int selection_threads = 1;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// One rollout of experience. Per-dimension log-probs are kept (not just the
// joint) because the masked objective needs them.
struct RolloutBatch {
  std::vector<Transition> transitions;
  Mat log_probs;       // n x p, at collection time (clamped actions)
  Vec values;          // V(s_t)
  Vec values_next;     // V(s_{t+1}), used to bootstrap across rollout ends
  std::vector<uint8_t> done;
  Vec advantages;      // filled by compute_gae
  Vec returns;

  int size() const { return static_cast<int>(transitions.size()); }
};

RolloutBatch collect_rollout(Env& env, const GaussianPolicy& policy,
                             const Mlp& v_net, int n_steps,
                             bool store_knockoffs, Rng& rng);

// Standard GAE recursion; returns = advantages + values. Advantages are also
// normalized to zero mean / unit variance within the batch.
void compute_gae(RolloutBatch& batch, double gamma, double lambda);

struct UpdateStats {
  double pi_loss = 0.0;       // first-minibatch clipped surrogate (negated)
  double v_loss = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
};

// Clipped-surrogate update over shuffled minibatches; the ratio uses the
// masked log probability on both sides, so masked dimensions contribute no
// gradient anywhere. Value net regresses to the GAE returns (state only, no
// mask). Throws std::runtime_error with diagnostics on a non-finite loss.
UpdateStats ppo_update(GaussianPolicy& policy, Mlp& v_net, AdamState& opt_pi,
                       AdamState& opt_v, RolloutBatch& batch,
                       const SelectionMask& mask, const TrainConfig& cfg,
                       Rng& shuffle_rng);

namespace detail {

// d surrogate / d (masked log-prob), and the surrogate value itself;
// surrogate = min(ratio * adv, clip(ratio) * adv).
struct SurrogateEval {
  double value = 0.0;
  double d_logp = 0.0;
};
SurrogateEval clipped_surrogate(double logp_new, double logp_old, double adv,
                                double clip_eps);

}  // namespace detail

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
};

// Greedy-mean rollouts (masked mean when a mask is given); undiscounted
// episode returns. Works with any environment exposing reset()/step()/spec().
template <class E>
EvalResult evaluate_policy(E& env, const GaussianPolicy& policy,
                           const SelectionMask* mask, int n_episodes) {
  if (n_episodes < 1)
    throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  Vec returns(n_episodes, 0.0);
  for (int ep = 0; ep < n_episodes; ++ep) {
    Vec s = env.reset();
    double total = 0.0;
    while (true) {
      Vec a = policy.mean_action(s);
      if (mask) a = mask_action_input(a, mask->m);
      StepResult out = env.step(a);
      total += out.r;
      if (out.done) break;
      s = out.s_next;
    }
    returns[ep] = total;
  }
  EvalResult res;
  res.mean_return = mean(returns);
  res.std_return = sample_std(returns);
  return res;
}

struct EvalPoint {
  long step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  std::string mask_state;   // "none", "all", or the selected indices
  double wall_clock = 0.0;  // seconds since training start
};

struct TrainResult {
  GaussianPolicy policy;
  Mlp v_net;
  SelectionMask mask;
  std::vector<EvalPoint> eval_log;
  std::optional<SelectionReport> selection_report;
  std::string selection_error;  // non-empty if selection failed (run continued)
  long selection_step = -1;     // step at which the mask was installed
};

// Algorithm loop: collect rollouts with knockoff copies until T_vs, run the
// knockoff selection once on the buffered data, install the hard mask and
// keep training with the masked objective. method All skips selection
// (all-ones mask); method True installs the ground-truth mask at step 0.
TrainResult train(const EnvSpec& spec, const TrainConfig& cfg);

void save_eval_log_jsonl(const std::string& path,
                         const std::vector<EvalPoint>& log);
std::vector<EvalPoint> load_eval_log_jsonl(const std::string& path);

void save_buffer_jsonl(const std::string& path,
                       const std::vector<Transition>& buffer);
std::vector<Transition> load_buffer_jsonl(const std::string& path);

}  // namespace ksrl

#endif  // KSRL_PPO_HPP
