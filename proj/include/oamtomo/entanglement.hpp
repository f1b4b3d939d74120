#pragma once

#include <optional>

#include "oamtomo/qutrit.hpp"

namespace oamtomo {

// Phases of the maximally entangled target family, in units of pi:
//   |MES(alpha, beta)> = (e^{i alpha pi}|L r> + |G g> + e^{i beta pi}|R l>) / sqrt(3).
struct MesParams {
  double alpha = 0.0;
  double beta = 0.0;
};

Ket9 mes_state(const MesParams& params);

// <MES(alpha,beta)| rho |MES(alpha,beta)>, evaluated in closed form
// from the three major diagonal elements and three coherences of rho.
double mes_fidelity(const DensityMatrix9& rho, const MesParams& params);

struct MesOptimum {
  MesParams params;
  double fidelity = 0.0;
};

// Maximizes mes_fidelity over (alpha, beta) in (-1, 1]^2: exhaustive
// grid of `grid_samples` points per axis followed by Nelder-Mead
// refinement. Exact ties on the grid resolve to the lexicographically
// smallest (alpha, beta).
MesOptimum optimize_mes(const DensityMatrix9& rho, int grid_samples = 721);

// Schmidt-number witness  W3 = I - (3/2) |MES><MES|.  tr(W3 rho) < 0
// is impossible for any state of Schmidt number <= 2, so a negative
// expectation certifies genuine three-dimensional entanglement. The
// threshold corresponds to fidelity 2/3.
Mat9 witness_operator(const MesParams& params);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

struct WitnessReport {
  double alpha = 0.0;
  double beta = 0.0;
  double fidelity = 0.0;
  double witness = 0.0;
  bool certified = false;
  std::optional<ConfidenceInterval> ci;
};

// Optimizes the target phases for rho, evaluates tr(W3 rho) with the
// explicit operator, and applies the certification rule: the witness
// expectation must be negative, and when a confidence interval is
// supplied its upper bound must be negative as well.
WitnessReport witness_report(const DensityMatrix9& rho,
                             std::optional<ConfidenceInterval> witness_ci = {},
                             int grid_samples = 721);

// Local filtering A (x) I with diagonal A chosen to equalize the three
// major diagonal elements (the |L r>, |G g>, |R l> populations),
// followed by renormalization. Throws std::invalid_argument when any
// major population is not strictly positive.
DensityMatrix9 local_filter_balance(const DensityMatrix9& rho);

// Population outside the three major components.
double residual_weight(const DensityMatrix9& rho);

}  // namespace oamtomo
