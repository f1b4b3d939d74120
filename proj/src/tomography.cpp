#include "oamtomo/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "oamtomo/rng.hpp"

namespace oamtomo {

namespace {

constexpr double kLogFloor = 1e-12;

void check_settings(const std::vector<ProjectorSetting>& settings) {
  if (settings.size() != 81) {
    throw std::invalid_argument("tomography: expected 81 settings, got " +
                                std::to_string(settings.size()));
  }
}

void check_counts(const CoincidenceTable& table) {
  for (int k = 0; k < 81; ++k) {
    if (table.counts[static_cast<std::size_t>(k)] < 0) {
      throw std::invalid_argument("tomography: negative count at setting " +
                                  std::to_string(k));
    }
    if (table.background_at(k) < 0.0) {
      throw std::invalid_argument("tomography: negative background at setting " +
                                  std::to_string(k));
    }
  }
}

double real_trace_product(const Mat9& op, const Mat9& s) {
  // tr(op * s) without forming the product: sum_{a,b} op(a,b) s(b,a).
  return op.transpose().cwiseProduct(s).sum().real();
}

// Upper-triangular factor T with real diagonal, so that
// rho = T^dag T / tr(T^dag T) sweeps exactly the physical states.
// Parameter layout: 9 diagonal entries, then (re, im) for each
// above-diagonal entry in row-major order; 81 reals total.
Mat9 unpack_factor(const Eigen::VectorXd& x) {
  Mat9 t = Mat9::Zero();
  for (int d = 0; d < 9; ++d) t(d, d) = x[d];
  int idx = 9;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) {
      t(i, j) = C64(x[idx], x[idx + 1]);
      idx += 2;
    }
  }
  return t;
}

Eigen::VectorXd pack_factor(const Mat9& t) {
  Eigen::VectorXd x(81);
  for (int d = 0; d < 9; ++d) x[d] = t(d, d).real();
  int idx = 9;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) {
      x[idx] = t(i, j).real();
      x[idx + 1] = t(i, j).imag();
      idx += 2;
    }
  }
  return x;
}

Eigen::VectorXd pack_gradient(const Mat9& gc) {
  // Projection of the complex matrix gradient onto the free entries.
  Eigen::VectorXd g(81);
  for (int d = 0; d < 9; ++d) g[d] = gc(d, d).real();
  int idx = 9;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) {
      g[idx] = gc(i, j).real();
      g[idx + 1] = gc(i, j).imag();
      idx += 2;
    }
  }
  return g;
}

struct Objective {
  const std::vector<ProjectorSetting>* settings = nullptr;
  std::array<double, 81> n{};
  std::array<double, 81> b{};
  double n_tot = 0.0;
  double trials = 0.0;
  Likelihood like = Likelihood::multinomial;
  double scale = 1.0;

  // Scaled objective and, when grad is non-null, its gradient with
  // respect to the packed parameters. For f = sum_k c_k tr(Pi_k S)
  // (plus trace terms) the matrix gradient is 2 T A with
  // A = sum_k c_k Pi_k (+ trace coefficient * I), from
  // d tr(A T^dag T) = 2 Re tr(A T^dag dT).
  double eval(const Mat9& t, Eigen::VectorXd* grad) const {
    const Mat9 s = (t.adjoint() * t).eval();
    std::array<double, 81> u{};
    for (int k = 0; k < 81; ++k) {
      u[static_cast<std::size_t>(k)] =
          real_trace_product((*settings)[static_cast<std::size_t>(k)].op, s);
    }
    double f = 0.0;
    Mat9 a = Mat9::Zero();
    if (like == Likelihood::poisson) {
      const double tr = s.trace().real();
      double trace_coeff = 0.0;
      for (int k = 0; k < 81; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const double lam = std::max(trials * u[ku] / tr + b[ku], kLogFloor);
        f -= n[ku] * std::log(lam) - lam;
        if (grad != nullptr) {
          const double w = 1.0 - n[ku] / lam;
          a += (w * trials / tr) * (*settings)[ku].op;
          trace_coeff -= w * trials * u[ku] / (tr * tr);
        }
      }
      if (grad != nullptr) a += trace_coeff * Mat9::Identity();
    } else {
      const double big_u = std::accumulate(u.begin(), u.end(), 0.0);
      for (int k = 0; k < 81; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const double uk = std::max(u[ku], kLogFloor * big_u);
        if (n[ku] > 0.0) f -= n[ku] * std::log(uk);
        if (grad != nullptr) {
          a += (-n[ku] / uk + n_tot / big_u) * (*settings)[ku].op;
        }
      }
      f += n_tot * std::log(big_u);
    }
    if (grad != nullptr) {
      *grad = pack_gradient((2.0 * scale) * (t * a));
    }
    return scale * f;
  }
};

Objective make_objective(const CoincidenceTable& table,
                         const std::vector<ProjectorSetting>& settings,
                         Likelihood like, std::int64_t trials_override) {
  check_settings(settings);
  check_counts(table);
  Objective obj;
  obj.settings = &settings;
  obj.like = like;
  for (int k = 0; k < 81; ++k) {
    obj.n[static_cast<std::size_t>(k)] =
        static_cast<double>(table.counts[static_cast<std::size_t>(k)]);
    obj.b[static_cast<std::size_t>(k)] = table.background_at(k);
  }
  obj.n_tot = static_cast<double>(table.total_counts());
  if (obj.n_tot <= 0.0) {
    throw std::invalid_argument("tomography: counts table is empty");
  }
  if (like == Likelihood::poisson) {
    const std::int64_t trials =
        trials_override > 0 ? trials_override : table.total_trials;
    if (trials <= 0) {
      throw std::invalid_argument(
          "tomography: poisson likelihood needs a positive trial count");
    }
    obj.trials = static_cast<double>(trials);
  }
  obj.scale = 1.0 / std::max(1.0, obj.n_tot);
  return obj;
}

// Factor of the warm-start state: clip eigenvalues away from zero,
// renormalize, and take the adjoint of the Cholesky factor so that
// T^dag T reproduces the state.
Mat9 factor_from_state(const Mat9& rho) {
  Mat9 h = 0.5 * (rho + rho.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Mat9> es(h);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("tomography: warm start eigendecomposition failed");
  }
  Eigen::Matrix<double, 9, 1> vals = es.eigenvalues().cwiseMax(1e-8);
  vals /= vals.sum();
  const Mat9 clipped =
      es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
  const Eigen::LLT<Mat9> llt(clipped);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("tomography: warm start factorization failed");
  }
  return Mat9(llt.matrixL()).adjoint();
}

}  // namespace

double CoincidenceTable::background_at(int k) const {
  if (k < 0 || k >= 81) {
    throw std::invalid_argument("CoincidenceTable: setting index out of range");
  }
  if (background.empty()) return 0.0;
  if (background.size() != 81) {
    throw std::invalid_argument("CoincidenceTable: background must have 81 entries");
  }
  return background[static_cast<std::size_t>(k)];
}

std::int64_t CoincidenceTable::total_counts() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

DensityMatrix9 TomographyResult::state() const {
  return DensityMatrix9::from(rho_hat);
}

double MonteCarloStats::percentile(double p) const {
  if (!(p >= 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile: p must lie in [0, 100]");
  }
  if (samples.empty()) {
    throw std::invalid_argument("percentile: no samples");
  }
  const double pos = p / 100.0 * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= samples.size()) return samples.back();
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] * (1.0 - frac) + samples[lo + 1] * frac;
}

Eigen::MatrixXcd measurement_matrix(const std::vector<ProjectorSetting>& settings) {
  check_settings(settings);
  Eigen::MatrixXcd m(81, 81);
  for (int k = 0; k < 81; ++k) {
    const Mat9& op = settings[static_cast<std::size_t>(k)].op;
    for (int r = 0; r < 9; ++r) {
      for (int c = 0; c < 9; ++c) {
        m(k, 9 * r + c) = std::conj(op(r, c));
      }
    }
  }
  return m;
}

Mat9 linear_inversion(const CoincidenceTable& table,
                      const std::vector<ProjectorSetting>& settings) {
  check_settings(settings);
  check_counts(table);
  const auto total = table.total_counts();
  if (total <= 0) {
    throw std::invalid_argument("linear_inversion: counts table is empty");
  }
  Eigen::VectorXcd f(81);
  for (int k = 0; k < 81; ++k) {
    f[k] = static_cast<double>(table.counts[static_cast<std::size_t>(k)]) /
           static_cast<double>(total);
  }
  const Eigen::MatrixXcd m = measurement_matrix(settings);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < 1e-10 * sv(0)) {
    throw std::runtime_error("linear_inversion: settings are rank deficient");
  }
  const Eigen::VectorXcd x = svd.solve(f);
  Mat9 rho;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      rho(r, c) = x[9 * r + c];
    }
  }
  rho = 0.5 * (rho + rho.adjoint().eval());
  const double tr = rho.trace().real();
  if (std::abs(tr) < 1e-12) {
    throw std::runtime_error("linear_inversion: reconstructed trace vanished");
  }
  return rho / tr;
}

double negative_log_likelihood(const CoincidenceTable& table,
                               const std::vector<ProjectorSetting>& settings,
                               const Mat9& rho, Likelihood likelihood,
                               std::int64_t trials_override) {
  const Objective obj = make_objective(table, settings, likelihood, trials_override);
  // Evaluate directly at rho: tr(Pi rho) plays the role of u_k with
  // unit trace normalization.
  std::array<double, 81> u{};
  for (int k = 0; k < 81; ++k) {
    u[static_cast<std::size_t>(k)] =
        real_trace_product(settings[static_cast<std::size_t>(k)].op, rho);
  }
  const double tr = rho.trace().real();
  double f = 0.0;
  if (likelihood == Likelihood::poisson) {
    for (int k = 0; k < 81; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const double lam = std::max(obj.trials * u[ku] / tr + obj.b[ku], kLogFloor);
      f -= obj.n[ku] * std::log(lam) - lam;
    }
  } else {
    const double big_u = std::accumulate(u.begin(), u.end(), 0.0);
    for (int k = 0; k < 81; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (obj.n[ku] > 0.0) {
        f -= obj.n[ku] * std::log(std::max(u[ku], kLogFloor * big_u));
      }
    }
    f += obj.n_tot * std::log(big_u);
  }
  return f;
}

TomographyResult mle_reconstruct(const CoincidenceTable& table,
                                 const std::vector<ProjectorSetting>& settings,
                                 const MleOptions& opts) {
  if (opts.max_iter < 1) {
    throw std::invalid_argument("mle_reconstruct: max_iter must be positive");
  }
  if (!(opts.rel_tol > 0.0)) {
    throw std::invalid_argument("mle_reconstruct: rel_tol must be positive");
  }
  const Objective obj =
      make_objective(table, settings, opts.likelihood, opts.trials_override);

  Mat9 t = opts.warm_start.has_value() ? factor_from_state(*opts.warm_start)
                                       : Mat9(Mat9::Identity() / 3.0);
  Eigen::VectorXd x = pack_factor(t);
  Eigen::VectorXd g(81);
  double f = obj.eval(t, &g);

  TomographyResult result;
  result.method = opts.likelihood;
  if (opts.record_nll_trace) result.nll_trace.push_back(f / obj.scale);

  // L-BFGS with a two-loop recursion and Armijo backtracking.  The history
  // spans the full parameter dimension: the problem is small and poorly
  // conditioned, and a short memory leaves the tail converging linearly.
  constexpr int kMemory = 81;
  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;
  int small_change_streak = 0;
  bool fell_back_this_iter = false;

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    Eigen::VectorXd d = -g;
    std::vector<double> alpha_hist(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha_hist[h] = rho_hist[h] * s_hist[h].dot(d);
      d -= alpha_hist[h] * y_hist[h];
    }
    if (!s_hist.empty()) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * y_hist[h].dot(d);
      d += (alpha_hist[h] - beta) * s_hist[h];
    }
    double slope = g.dot(d);
    if (slope >= 0.0) {
      d = -g;
      slope = g.dot(d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = (iter == 1) ? std::min(1.0, 1.0 / std::max(g.norm(), 1.0)) : 1.0;
    double f_new = f;
    Eigen::VectorXd x_new;
    Mat9 t_new;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + step * d;
      t_new = unpack_factor(x_new);
      f_new = obj.eval(t_new, nullptr);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty() && !fell_back_this_iter) {
        // Curvature memory may be stale; drop it and retry from the
        // raw gradient on the next pass.
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        fell_back_this_iter = true;
        continue;
      }
      break;
    }
    fell_back_this_iter = false;

    Eigen::VectorXd g_new(81);
    obj.eval(t_new, &g_new);
    const Eigen::VectorXd s_vec = x_new - x;
    const Eigen::VectorXd y_vec = g_new - g;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double df = std::abs(f - f_new);
    x = x_new;
    t = t_new;
    f = f_new;
    g = g_new;
    result.iterations = iter;
    if (opts.record_nll_trace) result.nll_trace.push_back(f / obj.scale);

    if (df <= opts.rel_tol * std::max(1.0, std::abs(f))) {
      if (++small_change_streak >= 2) {
        result.converged = true;
        break;
      }
    } else {
      small_change_streak = 0;
    }
    if (g.norm() <= 1e-12 * std::max(1.0, std::abs(f))) {
      result.converged = true;
      break;
    }
  }

  const Mat9 s_mat = (t.adjoint() * t).eval();
  const double tr = s_mat.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    throw std::runtime_error("mle_reconstruct: degenerate factor");
  }
  Mat9 rho = s_mat / tr;
  rho = 0.5 * (rho + rho.adjoint().eval());
  result.rho_hat = rho;
  result.nll = f / obj.scale;
  Eigen::SelfAdjointEigenSolver<Mat9> es(rho, Eigen::EigenvaluesOnly);
  result.min_eigenvalue = es.eigenvalues().minCoeff();
  return result;
}

MonteCarloStats monte_carlo_errors(
    const CoincidenceTable& observed, const std::vector<ProjectorSetting>& settings,
    int n_samples, const std::function<double(const DensityMatrix9&)>& derived,
    std::uint64_t seed, const MleOptions& opts) {
  if (n_samples < 2) {
    throw std::invalid_argument("monte_carlo_errors: need at least 2 samples");
  }
  if (!derived) {
    throw std::invalid_argument("monte_carlo_errors: derived quantity is empty");
  }
  const TomographyResult base = mle_reconstruct(observed, settings, opts);
  if (!base.converged) {
    throw std::runtime_error("monte_carlo_errors: fit to the observed counts did not converge");
  }
  MleOptions refit_opts = opts;
  refit_opts.warm_start = base.rho_hat;
  refit_opts.record_nll_trace = false;

  MonteCarloStats stats;
  stats.samples.reserve(static_cast<std::size_t>(n_samples));
  for (int sample = 0; sample < n_samples; ++sample) {
    auto eng = detail::make_engine(
        detail::sub_seed(seed, 0, static_cast<std::uint64_t>(sample)));
    CoincidenceTable resampled = observed;
    for (int k = 0; k < 81; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const auto n_k = observed.counts[ku];
      if (n_k > 0) {
        std::poisson_distribution<std::int64_t> pois(static_cast<double>(n_k));
        resampled.counts[ku] = pois(eng);
      } else {
        resampled.counts[ku] = 0;
      }
    }
    try {
      const TomographyResult fit = mle_reconstruct(resampled, settings, refit_opts);
      if (!fit.converged) {
        ++stats.excluded;
        continue;
      }
      const double value = derived(fit.state());
      if (!std::isfinite(value)) {
        ++stats.excluded;
        continue;
      }
      stats.samples.push_back(value);
    } catch (const std::exception&) {
      ++stats.excluded;
    }
  }
  if (stats.samples.empty()) {
    throw std::runtime_error("monte_carlo_errors: every resample was excluded");
  }
  std::sort(stats.samples.begin(), stats.samples.end());
  const double n = static_cast<double>(stats.samples.size());
  stats.mean = std::accumulate(stats.samples.begin(), stats.samples.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : stats.samples) ss += (v - stats.mean) * (v - stats.mean);
  stats.stddev = stats.samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return stats;
}

}  // namespace oamtomo
