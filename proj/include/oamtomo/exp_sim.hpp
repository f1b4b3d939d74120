#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "oamtomo/measurement.hpp"
#include "oamtomo/qutrit.hpp"
#include "oamtomo/tomography.hpp"

namespace oamtomo {

// Write-pulse-level model of the photon-atom source and detection
// chain. Per write pulse: a Stokes photon is scattered with probability
// excitation_prob, and given that, the paired atomic excitation is
// retrieved and detected with probability retrieval_eff. bg_stokes and
// bg_antistokes are uncorrelated click probabilities per pulse in the
// two arms.
struct SourceModel {
  DensityMatrix9 rho_true = DensityMatrix9::maximally_mixed();
  double excitation_prob = 5e-4;
  double retrieval_eff = 0.012;
  double bg_stokes = 0.0;
  double bg_antistokes = 0.0;
  double rep_period_ns = 400.0;
  double duration_s = 100.0;
  // Optional per-setting overrides of the scalar background rates, for
  // stray light that couples asymmetrically into the analyzers. Empty
  // means the scalar applies to every setting; otherwise 81 entries.
  std::vector<double> bg_stokes_override;
  std::vector<double> bg_antistokes_override;

  void validate() const;
  std::int64_t trials() const;
  double bg_stokes_at(int k) const;
  double bg_antistokes_at(int k) const;
};

// Expected coincidences per setting over the full run:
//   lambda_k = N [ eta p tr(Pi_k rho)
//                  + (p q_s,k + bg_s)(eta p q_a,k + bg_as) ]
// with q_s,k and q_a,k the single-arm acceptance probabilities of
// setting k, obtained by reducing Pi_k to each arm. The first term is
// genuine pairs, the second accidental coincidences.
std::array<double, 81> expected_counts(const SourceModel& model,
                                       const std::vector<ProjectorSetting>& settings);

// Poisson-samples every setting's count. The returned table carries the
// run metadata and stores the accidental part of each expectation in
// its background vector. Deterministic in (seed, setting index).
CoincidenceTable sample_counts(const SourceModel& model,
                               const std::vector<ProjectorSetting>& settings,
                               std::uint64_t seed);

// Second-order cross-correlation between the two arms,
//   g2 = 1 + eta p / ((p + bg_s)(eta p + bg_as)).
// With no background this reduces to 1 + 1/p.
double g2_model(double p, double eta, double bg_s, double bg_as);

// Background level that reproduces a target g2 at given p and eta.
// symmetric_bg = false puts all background on the Stokes arm
// (bg_as = 0); true solves for equal background in both arms. Throws
// std::invalid_argument when the target is not reachable with
// nonnegative background.
double g2_invert(double target_g2, double p, double eta, bool symmetric_bg);

// Estimator from raw tallies: g2 = (coincidences * trials) /
// (stokes_singles * antistokes_singles).
double g2_estimate(std::int64_t stokes_singles, std::int64_t antistokes_singles,
                   std::int64_t coincidences, std::int64_t trials);

// Analytic test state: a mixture
//   a |psi><psi| + b D_major + c D_rest
// where |psi> carries the requested phases over the three major
// components with amplitudes sqrt(major_diagonals), D_major is the
// diagonal state proportional to the major populations, and D_rest
// spreads c = 1 - sum(major_diagonals) evenly over the six remaining
// diagonal entries. The weight a is chosen so that the best MES
// fidelity equals target_fidelity exactly; the optimal phases are the
// planted (alpha, beta) and the major diagonal entries equal
// major_diagonals exactly. Throws std::invalid_argument when
// target_fidelity is outside the reachable range.
DensityMatrix9 planted_state(double alpha, double beta, double target_fidelity,
                             const std::array<double, 3>& major_diagonals);

}  // namespace oamtomo
