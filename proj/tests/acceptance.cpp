// Acceptance gate: one timed check per release criterion, each printed
// as a single [PASS]/[FAIL] line. Any failed line (or blown budget)
// makes the process exit nonzero.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oamtomo/entanglement.hpp"
#include "oamtomo/exp_sim.hpp"
#include "oamtomo/measurement.hpp"
#include "oamtomo/oam_optics.hpp"
#include "oamtomo/qutrit.hpp"
#include "oamtomo/tomography.hpp"
#include "test_util.hpp"

using namespace oamtomo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

// 1. The witness expectation must equal 1 - 1.5 F for every state and
// phase pair, and its sign must match the fidelity threshold 2/3.
Outcome witness_identity() {
  std::mt19937_64 rng(811);
  std::uniform_real_distribution<double> phase(-1.0, 1.0);
  std::uniform_real_distribution<double> mix(0.0, 0.5);
  double worst = 0.0;
  int negative_side = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DensityMatrix9 rho = testutil::random_state(rng);
    const MesParams params{phase(rng), phase(rng)};
    if (trial % 2 == 1) {
      // Bias half the draws toward the entangled side so both signs of
      // the witness are exercised.
      const double t = mix(rng);
      const Mat9 mixed = (1.0 - t) * projector(mes_state(params)) + t * rho.matrix();
      rho = DensityMatrix9::from(mixed);
    }
    const double fid = mes_fidelity(rho, params);
    const double via_op = (witness_operator(params) * rho.matrix()).trace().real();
    const double via_fid = 1.0 - 1.5 * fid;
    worst = std::max(worst, std::abs(via_op - via_fid));
    if (worst > 1e-12) {
      return {false, "identity residual " + fmt(worst) + " exceeds 1e-12"};
    }
    if ((via_op < 0.0) != (fid > 2.0 / 3.0)) {
      return {false, "sign rule broken at F = " + fmt(fid)};
    }
    if (via_op < 0.0) ++negative_side;
  }
  if (negative_side < 100 || negative_side > 900) {
    return {false, "sign coverage degenerate: " + std::to_string(negative_side) +
                       "/1000 negative"};
  }
  return {true, "1000 states, max residual " + fmt(worst) + ", " +
                    std::to_string(negative_side) + " certified draws"};
}

// 2. Noiseless expectation data must reconstruct essentially exactly,
// by both the likelihood fit and plain linear inversion.
Outcome tomography_closure() {
  std::mt19937_64 rng(822);
  const auto settings = projector_set();
  double worst_mle = 0.0;
  double worst_lin = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int rank = (trial % 5 == 4) ? 2 + (trial / 5) % 7 : 9;
    const DensityMatrix9 rho = testutil::random_state(rng, rank);
    const CoincidenceTable table = testutil::noiseless_counts(rho, settings);

    // Noiseless closure at 1e-4 needs a tighter tail than the default
    // stopping tolerance, which targets statistically noisy data.
    MleOptions opts;
    opts.rel_tol = 1e-14;
    const TomographyResult fit = mle_reconstruct(table, settings, opts);
    if (!fit.converged) {
      return {false, "fit " + std::to_string(trial) + " did not converge"};
    }
    worst_mle = std::max(worst_mle, trace_distance(fit.rho_hat, rho.matrix()));

    const Mat9 lin = linear_inversion(table, settings);
    worst_lin = std::max(worst_lin, trace_distance(lin, fit.rho_hat));
    if (worst_mle > 1e-4 || worst_lin > 1e-4) {
      return {false, "trial " + std::to_string(trial) + ": mle distance " +
                         fmt(worst_mle) + ", linear agreement " + fmt(worst_lin)};
    }
  }
  return {true, "50 states, worst mle distance " + fmt(worst_mle) +
                    ", worst linear agreement " + fmt(worst_lin)};
}

// 3. At the reference operating point the bootstrap interval around the
// fitted fidelity must cover the planted value in at least 45 of 50
// seeded runs.  The interval scale must match the reference error bar:
// the mean half-width lies in [0.01, 0.04], and so do at least 45 of the
// per-run half-widths (the per-run estimate from 150 resamples carries
// its own sampling noise, treated with the same 90% aggregation as the
// coverage clause).
Outcome paper_regime_pipeline() {
  const double planted_fidelity = 0.74;
  const DensityMatrix9 planted =
      planted_state(0.019, -0.058, planted_fidelity, {0.25, 0.37, 0.26});
  SourceModel model;
  model.rho_true = planted;
  const auto settings = projector_set();
  const auto fidelity_of = [](const DensityMatrix9& s) {
    return optimize_mes(s).fidelity;
  };

  int covered = 0;
  int width_in_band = 0;
  double hw_sum = 0.0;
  double hw_min = 1.0;
  double hw_max = 0.0;
  for (int run = 0; run < 50; ++run) {
    const CoincidenceTable table =
        sample_counts(model, settings, 1000 + static_cast<std::uint64_t>(run));
    const MonteCarloStats stats = monte_carlo_errors(
        table, settings, 150, fidelity_of, 5000 + static_cast<std::uint64_t>(run));
    const double lo = stats.percentile(2.5);
    const double hi = stats.percentile(97.5);
    const double hw = 0.5 * (hi - lo);
    hw_sum += hw;
    hw_min = std::min(hw_min, hw);
    hw_max = std::max(hw_max, hw);
    if (hw >= 0.01 && hw <= 0.04) ++width_in_band;
    if (lo <= planted_fidelity && planted_fidelity <= hi) ++covered;
  }
  const double hw_mean = hw_sum / 50.0;
  const bool pass = covered >= 45 && width_in_band >= 45 && hw_mean >= 0.01 &&
                    hw_mean <= 0.04;
  return {pass, "coverage " + std::to_string(covered) + "/50, half-widths [" +
                    fmt(hw_min) + ", " + fmt(hw_max) + "] mean " + fmt(hw_mean) +
                    ", " + std::to_string(width_in_band) + "/50 in band"};
}

// 4. Exact recovery of the target phases from a pure state.
Outcome mes_phase_recovery() {
  const MesParams truth{0.019, -0.058};
  const DensityMatrix9 rho = DensityMatrix9::pure(mes_state(truth));
  const MesOptimum opt = optimize_mes(rho);
  const double da = std::abs(opt.params.alpha - truth.alpha);
  const double db = std::abs(opt.params.beta - truth.beta);
  const bool pass = da <= 1e-6 && db <= 1e-6 && opt.fidelity > 1.0 - 1e-9;
  return {pass, "phase errors (" + fmt(da) + ", " + fmt(db) + ") pi, fidelity " +
                    fmt(opt.fidelity)};
}

// 5. Analytic anchors of the mode-conversion machinery.
Outcome optics_analytics() {
  const double w0 = 1.0;
  std::vector<double> s_values;
  for (int k = -12; k <= 12; ++k) s_values.push_back(0.25 * k);
  const auto scan = step_scan(w0, s_values, {});
  double worst = 0.0;
  for (std::size_t k = 0; k < scan.size(); ++k) {
    worst = std::max(worst, std::abs(scan[k].gaussian_component -
                                     step_gaussian_component_exact(s_values[k])));
  }
  if (worst > 1e-6) {
    return {false, "step scan deviates from erf^2 by " + fmt(worst)};
  }

  const Field gauss = lg_field({0, 0, w0});
  const double center = masked_gaussian_component(gauss, vortex_mask(1), w0);
  if (!(center < 1e-8)) {
    return {false, "centered vortex leaves fundamental component " + fmt(center)};
  }

  const double converted =
      std::norm(masked_overlap(gauss, vortex_mask(1), {0, 1, w0}));
  const double dev = std::abs(converted - M_PI / 4.0);
  if (dev > 1e-4) {
    return {false, "conversion into the ring mode off by " + fmt(dev)};
  }
  return {true, "step error " + fmt(worst) + ", vortex center " + fmt(center) +
                    ", conversion deviation " + fmt(dev)};
}

// 6. Shape of the displacement curves: even, monotone on each side,
// fully converting at the center, saturating far out, and stable under
// quadrature refinement.
Outcome curve_properties() {
  const double w0 = 1.0;
  const std::vector<double> side{0.5, 1.0, 1.5, 2.0, 3.0};
  std::vector<double> s_values{0.0};
  for (const double s : side) {
    s_values.push_back(s);
    s_values.push_back(-s);
  }

  struct Family {
    const char* name;
    std::function<std::vector<ScanPoint>(const std::vector<double>&, const QuadratureGrid&)> eval;
  };
  const std::vector<Family> families{
      {"vortex", [w0](const std::vector<double>& s, const QuadratureGrid& g) {
         return vortex_scan(w0, VortexPath::diagonal, s, g);
       }},
      {"step", [w0](const std::vector<double>& s, const QuadratureGrid& g) {
         return step_scan(w0, s, g);
       }}};

  // The displaced vortex core is a point where the mask phase is not
  // differentiable, which degrades the tensor Simpson rule to second
  // order there; mid-curve values need a finer grid than the default to
  // sit within 1e-5 of the refinement limit.
  QuadratureGrid base;
  base.samples_per_axis = 4096;
  QuadratureGrid fine;
  fine.samples_per_axis = 8192;

  for (const auto& fam : families) {
    const auto scan = fam.eval(s_values, base);
    if (!(scan[0].gaussian_component < 1e-8)) {
      return {false, std::string(fam.name) + " center value " +
                         fmt(scan[0].gaussian_component)};
    }
    double prev = scan[0].gaussian_component;
    for (std::size_t k = 0; k < side.size(); ++k) {
      const double pos = scan[1 + 2 * k].gaussian_component;
      const double neg = scan[2 + 2 * k].gaussian_component;
      if (std::abs(pos - neg) > 1e-9) {
        return {false, std::string(fam.name) + " asymmetric at |s| = " +
                           fmt(side[k]) + ": " + fmt(std::abs(pos - neg))};
      }
      if (pos < prev - 1e-12) {
        return {false, std::string(fam.name) + " not monotone at |s| = " + fmt(side[k])};
      }
      prev = pos;
    }
    const auto far = fam.eval({10.0}, base);
    if (std::abs(far[0].gaussian_component - 1.0) > 1e-2) {
      return {false, std::string(fam.name) + " saturates at " +
                         fmt(far[0].gaussian_component)};
    }
    const auto coarse_pts = fam.eval({0.5, 1.5}, base);
    const auto fine_pts = fam.eval({0.5, 1.5}, fine);
    for (std::size_t k = 0; k < coarse_pts.size(); ++k) {
      const double shift = std::abs(coarse_pts[k].gaussian_component -
                                    fine_pts[k].gaussian_component);
      if (shift > 1e-5) {
        return {false, std::string(fam.name) + " quadrature shift " + fmt(shift)};
      }
    }
  }
  return {true, "both families even, monotone, saturating, grid-stable"};
}

// 7. Photon statistics anchors.
Outcome g2_statistics() {
  for (const double eta : {0.001, 0.012, 0.3, 1.0}) {
    if (std::abs(g2_model(5e-4, eta, 0.0, 0.0) - 2001.0) > 1e-9) {
      return {false, "background-free value depends on eta = " + fmt(eta)};
    }
  }
  const double bg_a = g2_invert(74.6, 5e-4, 0.012, false);
  const double rt_a = g2_model(5e-4, 0.012, bg_a, 0.0);
  const double bg_s = g2_invert(74.6, 5e-4, 0.012, true);
  const double rt_s = g2_model(5e-4, 0.012, bg_s, bg_s);
  const double dev = std::max(std::abs(rt_a - 74.6), std::abs(rt_s - 74.6));
  if (dev > 1e-9) {
    return {false, "round trip misses the target by " + fmt(dev)};
  }
  return {true, "background-free 2001 exact, round trips within " + fmt(dev)};
}

// 8. Balancing the major populations by local filtering must not move
// the optimal fidelity by much on the reference state.
Outcome local_filtering() {
  const DensityMatrix9 rho = planted_state(0.019, -0.058, 0.74, {0.25, 0.37, 0.26});
  const double before = optimize_mes(rho).fidelity;
  const double after = optimize_mes(local_filter_balance(rho)).fidelity;
  const double shift = std::abs(after - before);
  return {shift < 0.03, "fidelity " + fmt(before) + " -> " + fmt(after) +
                            " (shift " + fmt(shift) + ")"};
}

// 9. The 81 settings must be informationally complete with a healthy
// margin.
Outcome informational_completeness() {
  const Eigen::MatrixXcd m = measurement_matrix(projector_set());
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  const double ratio = sv(sv.size() - 1) / sv(0);
  return {sv.size() == 81 && ratio > 1e-6,
          "condition sigma_min/sigma_max = " + fmt(ratio)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"witness identity and sign rule", 10.0, witness_identity},
      {"noiseless tomography closure", 300.0, tomography_closure},
      {"reference-regime pipeline coverage", 1800.0, paper_regime_pipeline},
      {"target phase recovery", 5.0, mes_phase_recovery},
      {"mode conversion analytics", 120.0, optics_analytics},
      {"displacement curve properties", 300.0, curve_properties},
      {"cross-correlation statistics", 1.0, g2_statistics},
      {"local filter stability", 10.0, local_filtering},
      {"informational completeness", 1.0, informational_completeness},
  };

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto& c = criteria[k];
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    bool pass = outcome.pass;
    std::string detail = outcome.detail;
    if (pass && elapsed > c.budget_s) {
      pass = false;
      detail += " [budget " + fmt(c.budget_s) + " s exceeded]";
    }
    if (!pass) ++failures;
    std::printf("[%s] %zu. %s (%.2f s) %s\n", pass ? "PASS" : "FAIL", k + 1,
                c.name, elapsed, detail.c_str());
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
