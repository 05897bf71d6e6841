#include "ksrl/knockoff.hpp"

#include <nlohmann/json.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ksrl {

AugmentedDataset build_augmented(const std::vector<Transition>& buffer) {
  if (buffer.empty()) throw std::invalid_argument("build_augmented: empty buffer");

  const int n = static_cast<int>(buffer.size());
  const int d_s = static_cast<int>(buffer[0].s.size());
  const int p = static_cast<int>(buffer[0].a.size());

  AugmentedDataset ds;
  ds.S = Mat(n, d_s);
  ds.A = Mat(n, p);
  ds.A_knockoff = Mat(n, p);
  ds.Y = Mat(n, d_s + 1);
  ds.fold.assign(n, 0);
  ds.t_index.resize(n);

  for (int t = 0; t < n; ++t) {
    const Transition& tr = buffer[t];
    if (!tr.has_knockoff())
      throw std::invalid_argument("build_augmented: transition " + std::to_string(t) +
                                  " is missing its knockoff copy");
    if (static_cast<int>(tr.s.size()) != d_s || static_cast<int>(tr.a.size()) != p ||
        static_cast<int>(tr.a_knockoff.size()) != p ||
        static_cast<int>(tr.s_next.size()) != d_s)
      throw std::invalid_argument("build_augmented: inconsistent transition shapes");

    for (int j = 0; j < d_s; ++j) ds.S(t, j) = tr.s[j];
    for (int j = 0; j < p; ++j) ds.A(t, j) = tr.a[j];
    for (int j = 0; j < p; ++j) ds.A_knockoff(t, j) = tr.a_knockoff[j];
    ds.Y(t, 0) = tr.r;
    for (int j = 0; j < d_s; ++j) ds.Y(t, j + 1) = tr.s_next[j];
    ds.t_index[t] = t;
  }
  return ds;
}

std::vector<AugmentedDataset> sample_split(const AugmentedDataset& ds, int K) {
  if (K < 1) throw std::invalid_argument("sample_split: K must be >= 1");
  if (K > ds.n()) throw std::invalid_argument("sample_split: K exceeds row count");

  std::vector<std::vector<int>> rows(K);
  for (int t = 0; t < ds.n(); ++t) rows[t % K].push_back(t);

  std::vector<AugmentedDataset> folds(K);
  for (int k = 0; k < K; ++k) {
    AugmentedDataset& f = folds[k];
    const int nk = static_cast<int>(rows[k].size());
    f.S = Mat(nk, ds.S.cols);
    f.A = Mat(nk, ds.A.cols);
    f.A_knockoff = Mat(nk, ds.A_knockoff.cols);
    f.Y = Mat(nk, ds.Y.cols);
    f.fold.assign(nk, k);
    f.t_index.resize(nk);
    for (int i = 0; i < nk; ++i) {
      const int t = rows[k][i];
      std::copy(ds.S.row(t), ds.S.row(t) + ds.S.cols, f.S.row(i));
      std::copy(ds.A.row(t), ds.A.row(t) + ds.A.cols, f.A.row(i));
      std::copy(ds.A_knockoff.row(t), ds.A_knockoff.row(t) + ds.A_knockoff.cols,
                f.A_knockoff.row(i));
      std::copy(ds.Y.row(t), ds.Y.row(t) + ds.Y.cols, f.Y.row(i));
      f.t_index[i] = ds.t_index[t];
    }
  }
  return folds;
}

// --- LASSO ---

namespace {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct StandardizedDesign {
  std::vector<Vec> cols;     // mean 0, x^T x / n = 1
  Vec means;
  Vec scales;                // sqrt(sum((x-mean)^2)/n)
  std::vector<char> excluded;
};

StandardizedDesign standardize(const std::vector<Vec>& x_cols) {
  const int q = static_cast<int>(x_cols.size());
  const int n = static_cast<int>(x_cols[0].size());
  StandardizedDesign d;
  d.cols.resize(q);
  d.means.resize(q);
  d.scales.resize(q);
  d.excluded.assign(q, 0);
  for (int j = 0; j < q; ++j) {
    const Vec& x = x_cols[j];
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    const double scale = std::sqrt(ss / n);
    d.means[j] = m;
    d.scales[j] = scale;
    if (scale < 1e-10 * (std::abs(m) + 1.0)) {
      d.excluded[j] = 1;
      d.cols[j].assign(n, 0.0);
      continue;
    }
    Vec xs(n);
    for (int i = 0; i < n; ++i) xs[i] = (x[i] - m) / scale;
    d.cols[j] = std::move(xs);
  }
  return d;
}

struct UpdateItem {
  int a = -1;
  int b = -1;  // -1 for a single-column update
};

// Paired columns are updated together; everything else cycles singly in
// column order.
std::vector<UpdateItem> build_schedule(int q, const PairSpec& pairs) {
  std::vector<int> partner(q, -1);
  if (pairs.count > 0) {
    if (pairs.first < 0 || pairs.second < 0 ||
        pairs.first + pairs.count > q || pairs.second + pairs.count > q)
      throw std::invalid_argument("lasso_cd: pair spec out of range");
    for (int i = 0; i < pairs.count; ++i) {
      partner[pairs.first + i] = pairs.second + i;
      partner[pairs.second + i] = pairs.first + i;
    }
  }
  std::vector<UpdateItem> schedule;
  std::vector<char> seen(q, 0);
  for (int j = 0; j < q; ++j) {
    if (seen[j]) continue;
    seen[j] = 1;
    if (partner[j] >= 0) {
      seen[partner[j]] = 1;
      schedule.push_back({j, partner[j]});
    } else {
      schedule.push_back({j, -1});
    }
  }
  return schedule;
}

}  // namespace

LassoFit lasso_cd(const std::vector<Vec>& x_cols, const Vec& y, double lambda,
                  const LassoOptions& opts) {
  const int q = static_cast<int>(x_cols.size());
  const int n = static_cast<int>(y.size());
  if (q == 0 || n < 2) throw std::invalid_argument("lasso_cd: need q >= 1, n >= 2");
  for (const Vec& c : x_cols) {
    if (static_cast<int>(c.size()) != n)
      throw std::invalid_argument("lasso_cd: column length mismatch");
    if (!all_finite(c)) throw std::invalid_argument("lasso_cd: non-finite design");
  }
  if (!all_finite(y)) throw std::invalid_argument("lasso_cd: non-finite response");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lasso_cd: bad lambda");

  StandardizedDesign d = standardize(x_cols);
  const double y_mean = mean(y);
  Vec r(n);
  for (int i = 0; i < n; ++i) r[i] = y[i] - y_mean;

  const std::vector<UpdateItem> schedule = build_schedule(q, opts.pairs);
  Vec beta(q, 0.0);

  LassoFit fit;
  fit.lambda = lambda;

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double delta_max = 0.0;
    for (const UpdateItem& item : schedule) {
      if (item.b < 0) {
        const int j = item.a;
        if (d.excluded[j]) continue;
        const double rho = beta[j] + dot(d.cols[j], r) / n;
        const double bn = soft_threshold(rho, lambda);
        const double delta = bn - beta[j];
        if (delta != 0.0) {
          const Vec& x = d.cols[j];
          for (int i = 0; i < n; ++i) r[i] -= delta * x[i];
          beta[j] = bn;
        }
        delta_max = std::max(delta_max, std::abs(delta));
      } else {
        // Both proposals read the same residual snapshot and the residual is
        // updated with the per-element pair sum, so exchanging the two
        // columns exchanges the iterates bit for bit.
        const int a = item.a, b = item.b;
        double delta_a = 0.0, delta_b = 0.0;
        double bn_a = beta[a], bn_b = beta[b];
        if (!d.excluded[a]) {
          const double rho = beta[a] + dot(d.cols[a], r) / n;
          bn_a = soft_threshold(rho, lambda);
          delta_a = bn_a - beta[a];
        }
        if (!d.excluded[b]) {
          const double rho = beta[b] + dot(d.cols[b], r) / n;
          bn_b = soft_threshold(rho, lambda);
          delta_b = bn_b - beta[b];
        }
        if (delta_a != 0.0 || delta_b != 0.0) {
          const Vec& xa = d.cols[a];
          const Vec& xb = d.cols[b];
          for (int i = 0; i < n; ++i) r[i] -= delta_a * xa[i] + delta_b * xb[i];
          beta[a] = bn_a;
          beta[b] = bn_b;
        }
        delta_max = std::max(delta_max, std::max(std::abs(delta_a), std::abs(delta_b)));
      }
    }
    fit.n_iter = sweep;
    if (delta_max < opts.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.beta_std = beta;
  fit.coefficients.assign(q, 0.0);
  double offset = 0.0;
  for (int j = 0; j < q; ++j) {
    if (d.excluded[j] || beta[j] == 0.0) continue;
    fit.coefficients[j] = beta[j] / d.scales[j];
    offset += fit.coefficients[j] * d.means[j];
  }
  fit.intercept = y_mean - offset;
  return fit;
}

double lasso_lambda_max(const std::vector<Vec>& x_cols, const Vec& y) {
  StandardizedDesign d = standardize(x_cols);
  const int n = static_cast<int>(y.size());
  const double y_mean = mean(y);
  Vec yc(n);
  for (int i = 0; i < n; ++i) yc[i] = y[i] - y_mean;

  double lmax = 0.0;
  for (size_t j = 0; j < d.cols.size(); ++j) {
    if (d.excluded[j]) continue;
    lmax = std::max(lmax, std::abs(dot(d.cols[j], yc) / n));
  }
  return lmax;
}

LambdaRule LambdaRule::fixed(double fraction) {
  LambdaRule r;
  r.kind = Kind::FixedFraction;
  r.fraction = fraction;
  return r;
}

LambdaRule LambdaRule::cross_validated(int folds, int grid) {
  LambdaRule r;
  r.kind = Kind::CrossValidated;
  r.cv_folds = folds;
  r.cv_grid = grid;
  return r;
}

std::string LambdaRule::describe() const {
  if (kind == Kind::FixedFraction)
    return "fixed_fraction:" + std::to_string(fraction);
  return "cv:" + std::to_string(cv_folds) + "x" + std::to_string(cv_grid);
}

namespace {

// Held-out predictions accumulate paired columns per element, keeping the
// whole CV path swap-symmetric like the solver itself.
double cv_mse(const std::vector<Vec>& x_cols, const Vec& y, double lambda,
              const PairSpec& pairs, int cv_folds) {
  const int n = static_cast<int>(y.size());
  const int q = static_cast<int>(x_cols.size());
  double total_sq = 0.0;
  int total_count = 0;

  for (int f = 0; f < cv_folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i)
      (i % cv_folds == f ? test_rows : train_rows).push_back(i);
    if (train_rows.size() < 2 || test_rows.empty()) continue;

    std::vector<Vec> train_cols(q, Vec(train_rows.size()));
    Vec train_y(train_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i) {
      for (int j = 0; j < q; ++j) train_cols[j][i] = x_cols[j][train_rows[i]];
      train_y[i] = y[train_rows[i]];
    }
    LassoOptions fit_opts;
    fit_opts.pairs = pairs;
    LassoFit fit = lasso_cd(train_cols, train_y, lambda, fit_opts);

    std::vector<int> partner(q, -1);
    for (int i = 0; i < pairs.count; ++i) {
      partner[pairs.first + i] = pairs.second + i;
      partner[pairs.second + i] = pairs.first + i;
    }
    for (int row : test_rows) {
      double pred = fit.intercept;
      for (int j = 0; j < q; ++j) {
        if (partner[j] > j) {
          pred += fit.coefficients[j] * x_cols[j][row] +
                  fit.coefficients[partner[j]] * x_cols[partner[j]][row];
        } else if (partner[j] < 0) {
          pred += fit.coefficients[j] * x_cols[j][row];
        }
      }
      const double e = pred - y[row];
      total_sq += e * e;
      total_count += 1;
    }
  }
  return total_count > 0 ? total_sq / total_count : 0.0;
}

}  // namespace

double choose_lambda(const std::vector<Vec>& x_cols, const Vec& y,
                     const LambdaRule& rule, const PairSpec& pairs) {
  const double lmax = lasso_lambda_max(x_cols, y);
  if (rule.kind == LambdaRule::Kind::FixedFraction) return rule.fraction * lmax;

  if (lmax == 0.0) return 0.0;
  // geometric grid from lambda_max down to 0.01 * lambda_max; ties go to the
  // sparser (larger) lambda
  double best_lambda = lmax;
  double best_mse = std::numeric_limits<double>::infinity();
  for (int g = 0; g < rule.cv_grid; ++g) {
    const double frac = std::pow(0.01, static_cast<double>(g) /
                                           std::max(1, rule.cv_grid - 1));
    const double lambda = lmax * frac;
    const double mse = cv_mse(x_cols, y, lambda, pairs, rule.cv_folds);
    if (mse < best_mse) {
      best_mse = mse;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

// --- importance scores and fold selection ---

namespace {

std::vector<Vec> extract_design_columns(const AugmentedDataset& fold) {
  std::vector<Vec> cols;
  cols.reserve(fold.state_dim() + 2 * fold.action_dim());
  for (int j = 0; j < fold.state_dim(); ++j) cols.push_back(fold.S.col(j));
  for (int j = 0; j < fold.action_dim(); ++j) cols.push_back(fold.A.col(j));
  for (int j = 0; j < fold.action_dim(); ++j) cols.push_back(fold.A_knockoff.col(j));
  return cols;
}

std::vector<int> resolve_outcomes(const AugmentedDataset& fold,
                                  const std::vector<int>& outcome_columns) {
  if (outcome_columns.empty()) {
    std::vector<int> all(fold.n_outcomes());
    for (int i = 0; i < fold.n_outcomes(); ++i) all[i] = i;
    return all;
  }
  std::set<int> uniq(outcome_columns.begin(), outcome_columns.end());
  if (uniq.size() != outcome_columns.size() || *uniq.begin() < 0 ||
      *uniq.rbegin() >= fold.n_outcomes())
    throw std::invalid_argument("importance_scores: bad outcome column list");
  return outcome_columns;
}

struct OutcomeFit {
  Vec z;            // |coef of A_j| per action
  Vec z_knockoff;   // |coef of A~_j|
  bool degenerate = false;
};

OutcomeFit fit_one_outcome(const std::vector<Vec>& cols, int state_dim,
                           int action_dim, const Vec& y,
                           const LambdaRule& lambda_rule) {
  OutcomeFit out;
  out.z.assign(action_dim, 0.0);
  out.z_knockoff.assign(action_dim, 0.0);
  if (sample_std(y) < 1e-10 * (std::abs(mean(y)) + 1.0)) {
    out.degenerate = true;
    return out;
  }
  PairSpec pairs{state_dim, state_dim + action_dim, action_dim};
  const double lambda = choose_lambda(cols, y, lambda_rule, pairs);
  LassoOptions opts;
  opts.pairs = pairs;
  LassoFit fit = lasso_cd(cols, y, lambda, opts);
  for (int j = 0; j < action_dim; ++j) {
    out.z[j] = std::abs(fit.beta_std[state_dim + j]);
    out.z_knockoff[j] = std::abs(fit.beta_std[state_dim + action_dim + j]);
  }
  return out;
}

KnockoffStats finish_fold(const ImportanceScores& scores, double alpha) {
  KnockoffStats stats;
  const int p = scores.Z.rows;
  stats.Z.resize(p);
  stats.Z_knockoff.resize(p);
  for (int j = 0; j < p; ++j) {
    double z = scores.Z(j, 0), zk = scores.Z_knockoff(j, 0);
    for (int i = 1; i < scores.Z.cols; ++i) {
      z = std::max(z, scores.Z(j, i));
      zk = std::max(zk, scores.Z_knockoff(j, i));
    }
    stats.Z[j] = z;
    stats.Z_knockoff[j] = zk;
  }
  stats.W = aggregate_w(scores.Z, scores.Z_knockoff);
  stats.tau = knockoff_threshold(stats.W, alpha);
  for (int j = 0; j < p; ++j)
    if (stats.W[j] >= stats.tau) stats.selected.push_back(j);
  return stats;
}

}  // namespace

ImportanceScores importance_scores(const AugmentedDataset& fold,
                                   const LambdaRule& lambda_rule,
                                   const std::vector<int>& outcome_columns) {
  if (fold.n() < 20)
    throw std::invalid_argument("importance_scores: fold has fewer than 20 rows");

  const std::vector<int> outcomes = resolve_outcomes(fold, outcome_columns);
  const std::vector<Vec> cols = extract_design_columns(fold);
  const int p = fold.action_dim();

  ImportanceScores scores;
  scores.Z = Mat(p, static_cast<int>(outcomes.size()));
  scores.Z_knockoff = Mat(p, static_cast<int>(outcomes.size()));
  for (size_t i = 0; i < outcomes.size(); ++i) {
    OutcomeFit of = fit_one_outcome(cols, fold.state_dim(), p,
                                    fold.Y.col(outcomes[i]), lambda_rule);
    if (of.degenerate) scores.degenerate_outcomes.push_back(outcomes[i]);
    for (int j = 0; j < p; ++j) {
      scores.Z(j, static_cast<int>(i)) = of.z[j];
      scores.Z_knockoff(j, static_cast<int>(i)) = of.z_knockoff[j];
    }
  }
  return scores;
}

Vec aggregate_w(const Mat& z, const Mat& z_knockoff) {
  if (!z.same_shape(z_knockoff))
    throw std::invalid_argument("aggregate_w: shape mismatch");
  Vec w(z.rows);
  for (int j = 0; j < z.rows; ++j) {
    double zm = z(j, 0), zkm = z_knockoff(j, 0);
    for (int i = 1; i < z.cols; ++i) {
      zm = std::max(zm, z(j, i));
      zkm = std::max(zkm, z_knockoff(j, i));
    }
    w[j] = zm - zkm;
  }
  return w;
}

double knockoff_threshold(const Vec& w, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("knockoff_threshold: alpha must be in (0,1)");

  std::vector<double> candidates;
  for (double v : w)
    if (v != 0.0) candidates.push_back(std::abs(v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  for (double tau : candidates) {
    int num = 0, den = 0;
    for (double v : w) {
      if (v <= -tau) ++num;
      if (v >= tau) ++den;
    }
    if (den > 0 && static_cast<double>(num) / den <= alpha) return tau;
  }
  return std::numeric_limits<double>::infinity();
}

KnockoffStats select_fold(const AugmentedDataset& fold, double alpha,
                          const LambdaRule& lambda_rule,
                          const std::vector<int>& outcome_columns) {
  return finish_fold(importance_scores(fold, lambda_rule, outcome_columns), alpha);
}

std::vector<int> majority_vote(const std::vector<std::vector<int>>& fold_selections,
                               int K, double gamma) {
  if (static_cast<int>(fold_selections.size()) != K)
    throw std::invalid_argument("majority_vote: need exactly K fold selections");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("majority_vote: gamma must be in (0,1]");

  int p_max = -1;
  std::map<int, int> votes;
  for (const auto& sel : fold_selections)
    for (int j : sel) {
      votes[j] += 1;
      p_max = std::max(p_max, j);
    }

  std::vector<int> selected;
  for (const auto& [j, count] : votes) {
    // boundary inclusive: p_hat_j >= gamma
    if (static_cast<double>(count) / K + 1e-12 >= gamma) selected.push_back(j);
  }
  return selected;
}

SelectionMask select_actions(const std::vector<Transition>& buffer,
                             const SelectOptions& opts, SelectionReport* report) {
  const auto t_start = std::chrono::steady_clock::now();

  if (opts.k_folds < 1)
    throw std::invalid_argument("select_actions: k_folds must be >= 1");
  if (buffer.size() < static_cast<size_t>(20 * opts.k_folds))
    throw std::runtime_error(
        "select_actions: need at least 20*K transitions with knockoffs (have " +
        std::to_string(buffer.size()) + ", K=" + std::to_string(opts.k_folds) +
        "); increase T_vs or reduce k_folds");

  AugmentedDataset ds = build_augmented(buffer);
  if (!all_finite(ds.S.data) || !all_finite(ds.A.data) ||
      !all_finite(ds.A_knockoff.data) || !all_finite(ds.Y.data))
    throw std::invalid_argument("select_actions: non-finite buffer data");

  const std::vector<AugmentedDataset> folds = sample_split(ds, opts.k_folds);
  const std::vector<int> outcomes = resolve_outcomes(ds, opts.outcome_columns);
  const int K = opts.k_folds;
  const int n_out = static_cast<int>(outcomes.size());
  const int p = ds.action_dim();
  const int d_s = ds.state_dim();

  // Per-fold design columns are shared read-only across the outcome fits.
  std::vector<std::vector<Vec>> fold_cols(K);
  for (int k = 0; k < K; ++k) fold_cols[k] = extract_design_columns(folds[k]);

  // One job per (fold, outcome); every fit is pure, so the OpenMP path is
  // bit-identical to the serial reference regardless of schedule.
  std::vector<OutcomeFit> job_results(static_cast<size_t>(K) * n_out);
  auto run_job = [&](int job) {
    const int k = job / n_out;
    const int i = job % n_out;
    job_results[job] = fit_one_outcome(fold_cols[k], d_s, p,
                                       folds[k].Y.col(outcomes[i]),
                                       opts.lambda_rule);
  };
  const int n_jobs = K * n_out;
  if (opts.threads > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(opts.threads)
    for (int job = 0; job < n_jobs; ++job) run_job(job);
  } else {
    for (int job = 0; job < n_jobs; ++job) run_job(job);
  }

  std::vector<KnockoffStats> fold_stats(K);
  std::vector<std::vector<int>> fold_selections(K);
  for (int k = 0; k < K; ++k) {
    ImportanceScores scores;
    scores.Z = Mat(p, n_out);
    scores.Z_knockoff = Mat(p, n_out);
    for (int i = 0; i < n_out; ++i) {
      const OutcomeFit& of = job_results[static_cast<size_t>(k) * n_out + i];
      if (of.degenerate) scores.degenerate_outcomes.push_back(outcomes[i]);
      for (int j = 0; j < p; ++j) {
        scores.Z(j, i) = of.z[j];
        scores.Z_knockoff(j, i) = of.z_knockoff[j];
      }
    }
    fold_stats[k] = finish_fold(scores, opts.alpha);
    fold_selections[k] = fold_stats[k].selected;
  }

  const std::vector<int> final_selected =
      majority_vote(fold_selections, K, opts.vote_gamma);

  SelectionMask mask = SelectionMask::from_indices(final_selected, p);
  mask.vote_counts.assign(p, 0);
  for (const auto& sel : fold_selections)
    for (int j : sel) mask.vote_counts[j] += 1;
  mask.w_stats = fold_stats.back().W;
  mask.tau = fold_stats.back().tau;

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  if (report) {
    report->n = ds.n();
    report->p = p;
    report->state_dim = d_s;
    report->alpha = opts.alpha;
    report->vote_gamma = opts.vote_gamma;
    report->k_folds = K;
    report->lambda_policy = opts.lambda_rule.describe();
    report->folds = fold_stats;
    report->vote_freq.assign(p, 0.0);
    for (int j = 0; j < p; ++j)
      report->vote_freq[j] = static_cast<double>(mask.vote_counts[j]) / K;
    report->selected = final_selected;
    report->wall_clock_sec = elapsed;
  }
  return mask;
}

void save_selection_report(const std::string& path, const SelectionReport& report) {
  nlohmann::json j;
  j["n"] = report.n;
  j["p"] = report.p;
  j["state_dim"] = report.state_dim;
  j["alpha"] = report.alpha;
  j["vote_gamma"] = report.vote_gamma;
  j["k_folds"] = report.k_folds;
  j["lambda_policy"] = report.lambda_policy;
  j["wall_clock_sec"] = report.wall_clock_sec;
  j["vote_freq"] = report.vote_freq;
  j["selected"] = report.selected;
  nlohmann::json folds = nlohmann::json::array();
  for (const KnockoffStats& f : report.folds) {
    nlohmann::json jf;
    jf["Z"] = f.Z;
    jf["Z_knockoff"] = f.Z_knockoff;
    jf["W"] = f.W;
    jf["tau"] = std::isfinite(f.tau) ? nlohmann::json(f.tau) : nlohmann::json("inf");
    jf["selected"] = f.selected;
    folds.push_back(std::move(jf));
  }
  j["folds"] = std::move(folds);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_selection_report: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace ksrl
