#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "oamtomo/measurement.hpp"
#include "oamtomo/qutrit.hpp"

namespace oamtomo {

// Coincidence counts for the 81 joint settings (row-major, 9*i + j)
// plus acquisition metadata. total_trials = 0 means unknown. An empty
// background vector means zero background for every setting.
struct CoincidenceTable {
  std::array<std::int64_t, 81> counts{};
  double duration_s = 0.0;
  std::int64_t total_trials = 0;
  std::vector<double> background;

  double background_at(int k) const;
  std::int64_t total_counts() const;
};

enum class Likelihood { poisson, multinomial };

struct MleOptions {
  int max_iter = 5000;
  double rel_tol = 1e-10;
  Likelihood likelihood = Likelihood::multinomial;
  // Poisson mode: number of trials behind each setting's counts. Falls
  // back to CoincidenceTable::total_trials when zero.
  std::int64_t trials_override = 0;
  // Starting state; defaults to the maximally mixed state.
  std::optional<Mat9> warm_start;
  bool record_nll_trace = false;
};

struct TomographyResult {
  Mat9 rho_hat = Mat9::Zero();
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  Likelihood method = Likelihood::multinomial;
  double min_eigenvalue = 0.0;
  std::vector<double> nll_trace;

  // Validated view of rho_hat.
  DensityMatrix9 state() const;
};

// Sampling statistics of a scalar derived quantity under Monte-Carlo
// resampling of the counts. `samples` is sorted ascending.
struct MonteCarloStats {
  std::vector<double> samples;
  double mean = 0.0;
  double stddev = 0.0;
  int excluded = 0;

  // Linear-interpolation percentile, p in [0, 100].
  double percentile(double p) const;
};

// Row k holds conj(vec(Pi_k)) so that M * vec(rho) = expected
// frequencies, with vec() row-major.
Eigen::MatrixXcd measurement_matrix(const std::vector<ProjectorSetting>& settings);

// Direct linear solve of the Born-rule system for the observed
// frequencies. The result is Hermitian with unit trace but may have
// negative eigenvalues; it serves as a diagnostic and as a warm start.
// Throws std::runtime_error if the settings are rank deficient.
Mat9 linear_inversion(const CoincidenceTable& table,
                      const std::vector<ProjectorSetting>& settings);

// Maximum-likelihood reconstruction over the Cholesky-style
// parameterization rho = T^dag T / tr(T^dag T), which keeps every
// iterate a physical state. Minimizes the Poisson negative log
// likelihood  -sum_k [n_k ln(lambda_k) - lambda_k]  with
// lambda_k = N tr(Pi_k rho) + b_k, or its multinomial counterpart in
// which the total count is profiled out, by L-BFGS with backtracking.
TomographyResult mle_reconstruct(const CoincidenceTable& table,
                                 const std::vector<ProjectorSetting>& settings,
                                 const MleOptions& opts = {});

// Objective value used by mle_reconstruct, exposed so that optimality
// can be cross-checked against candidate states.
double negative_log_likelihood(const CoincidenceTable& table,
                               const std::vector<ProjectorSetting>& settings,
                               const Mat9& rho, Likelihood likelihood,
                               std::int64_t trials_override = 0);

// Parametric-bootstrap error bars: resamples each observed count as
// Poisson(n_k), refits, and evaluates `derived` on every refitted
// state. Samples that fail to converge or whose derived evaluation
// throws are excluded and counted. Deterministic in `seed` regardless
// of evaluation order.
MonteCarloStats monte_carlo_errors(
    const CoincidenceTable& observed, const std::vector<ProjectorSetting>& settings,
    int n_samples, const std::function<double(const DensityMatrix9&)>& derived,
    std::uint64_t seed, const MleOptions& opts = {});

}  // namespace oamtomo
