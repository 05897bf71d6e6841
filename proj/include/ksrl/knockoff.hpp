#ifndef KSRL_KNOCKOFF_HPP
#define KSRL_KNOCKOFF_HPP

#include <limits>
#include <string>
#include <vector>

#include "ksrl/env.hpp"
#include "ksrl/mat.hpp"
#include "ksrl/policy.hpp"

namespace ksrl {

// Buffered transitions reshaped for regression: Y column 0 is the reward,
// columns 1..d_s are the next-state dimensions.
struct AugmentedDataset {
  Mat S;                        // n x d_s
  Mat A;                        // n x p
  Mat A_knockoff;               // n x p
  Mat Y;                        // n x (d_s + 1)
  std::vector<int> fold;        // fold id per row (t mod K), 0-based
  std::vector<long> t_index;    // original buffer index per row
  int n_folds = 1;

  int n() const { return S.rows; }
  int state_dim() const { return S.cols; }
  int action_dim() const { return A.cols; }
  int n_outcomes() const { return Y.cols; }
};

// Throws if the buffer is empty or any transition lacks its knockoff copy.
AugmentedDataset build_augmented(const std::vector<Transition>& buffer);

// Partition by t mod K: row t goes to fold t mod K, so same-trajectory rows
// within a fold sit at least K steps apart. Throws for K < 1 or K > n.
std::vector<AugmentedDataset> sample_split(const AugmentedDataset& ds, int K);

// --- LASSO ---

struct LassoFit {
  Vec coefficients;   // original scale
  Vec beta_std;       // standardized scale (importance scores, KKT checks)
  double intercept = 0.0;
  double lambda = 0.0;
  bool converged = false;
  int n_iter = 0;     // full sweeps
};

// Columns first+i and second+i are updated jointly from a shared residual
// snapshot. This makes the solver exactly equivariant under swapping a column
// with its partner, which the knockoff W-statistics need bitwise.
struct PairSpec {
  int first = 0;
  int second = 0;
  int count = 0;
};

struct LassoOptions {
  double tol = 1e-8;
  int max_sweeps = 10000;
  PairSpec pairs;  // count == 0 disables pairing (plain cyclic descent)
};

// Minimizes (1/2n)|y_c - X_s b|^2 + lambda |b|_1 over standardized columns
// (mean 0, x^T x / n = 1) with centered y, by cyclic coordinate descent with
// soft-thresholding. beta_std holds the standardized-scale solution;
// coefficients/intercept are mapped back to the original scale. Constant
// columns are excluded (coefficient pinned at zero).
LassoFit lasso_cd(const std::vector<Vec>& x_cols, const Vec& y, double lambda,
                  const LassoOptions& opts = {});

// Largest penalty with a nonzero solution, on the standardized scale.
double lasso_lambda_max(const std::vector<Vec>& x_cols, const Vec& y);

struct LambdaRule {
  enum class Kind { FixedFraction, CrossValidated };
  Kind kind = Kind::FixedFraction;
  double fraction = 0.1;   // lambda = fraction * lambda_max
  int cv_folds = 5;        // CrossValidated only
  int cv_grid = 10;        // geometric grid from lambda_max down to 0.01*lambda_max

  static LambdaRule fixed(double fraction = 0.1);
  static LambdaRule cross_validated(int folds = 5, int grid = 10);
  std::string describe() const;
};

// Picks a penalty for the given design under the rule; deterministic and
// exactly symmetric under paired-column swaps.
double choose_lambda(const std::vector<Vec>& x_cols, const Vec& y,
                     const LambdaRule& rule, const PairSpec& pairs);

// --- per-fold knockoff statistics ---

struct KnockoffStats {
  Vec Z;               // max_i Z_{j,i} per action
  Vec Z_knockoff;      // max_i Z~_{j,i}
  Vec W;               // Z_j - Z~_j
  double tau = std::numeric_limits<double>::infinity();
  std::vector<int> selected;
};

struct ImportanceScores {
  Mat Z;                              // p x n_outcomes
  Mat Z_knockoff;                     // p x n_outcomes
  std::vector<int> degenerate_outcomes;  // constant Y columns (scored zero)
};

// Fits one LASSO per outcome column on the standardized design [S, A, A~] and
// records |coef| of each action and of its knockoff. State columns are
// covariates only and are never scored. Requires >= 20 rows.
ImportanceScores importance_scores(const AugmentedDataset& fold,
                                   const LambdaRule& lambda_rule,
                                   const std::vector<int>& outcome_columns = {});

// W_j = max_i Z_{j,i} - max_i Z~_{j,i}.
Vec aggregate_w(const Mat& z, const Mat& z_knockoff);

// Smallest tau on the candidate grid {|W_j| : W_j != 0} with
// #{W_j <= -tau} / #{W_j >= tau} <= alpha (0/0 counts as +inf).
// Returns +inf when no candidate qualifies (empty selection).
double knockoff_threshold(const Vec& w, double alpha);

// importance_scores -> aggregate_w -> knockoff_threshold -> {j : W_j >= tau}.
KnockoffStats select_fold(const AugmentedDataset& fold, double alpha,
                          const LambdaRule& lambda_rule = {},
                          const std::vector<int>& outcome_columns = {});

// p_hat_j = (#folds containing j)/K; keep j iff p_hat_j >= gamma (inclusive).
std::vector<int> majority_vote(const std::vector<std::vector<int>>& fold_selections,
                               int K, double gamma);

// --- full pipeline ---

struct SelectOptions {
  double alpha = 0.1;
  double vote_gamma = 0.5;
  int k_folds = 5;
  LambdaRule lambda_rule;
  std::vector<int> outcome_columns;  // empty = reward + all next-state dims
  int threads = 1;                   // 1 = serial reference path
};

struct SelectionReport {
  int n = 0;
  int p = 0;
  int state_dim = 0;
  double alpha = 0.0;
  double vote_gamma = 0.0;
  int k_folds = 0;
  std::string lambda_policy;
  std::vector<KnockoffStats> folds;
  Vec vote_freq;                // p_hat per action
  std::vector<int> selected;    // final G-hat
  double wall_clock_sec = 0.0;
};

// Algorithm: build_augmented -> sample_split -> select_fold x K ->
// majority_vote. The K x n_outcomes LASSO fits are pure and run under OpenMP
// when opts.threads > 1; results are identical to the serial path bit for
// bit. Requires at least 20*K transitions, all carrying knockoffs.
SelectionMask select_actions(const std::vector<Transition>& buffer,
                             const SelectOptions& opts,
                             SelectionReport* report = nullptr);

void save_selection_report(const std::string& path, const SelectionReport& report);

}  // namespace ksrl

#endif  // KSRL_KNOCKOFF_HPP
