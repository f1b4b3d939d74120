#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "oamtomo/qutrit.hpp"
#include "oamtomo/tomography.hpp"

namespace testutil {

using oamtomo::C64;
using oamtomo::DensityMatrix9;
using oamtomo::Mat9;

// Ginibre-ensemble mixed state: G G^dag normalized, full rank almost
// surely. rank < 9 restricts to that many columns, giving rank-deficient
// states for edge cases.
inline DensityMatrix9 random_state(std::mt19937_64& rng, int rank = 9) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(9, rank);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < rank; ++c) {
      g(r, c) = C64(gauss(rng), gauss(rng));
    }
  }
  Mat9 rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix9::from(rho);
}

inline oamtomo::Ket9 random_pure(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  oamtomo::Vec9 v;
  for (int r = 0; r < 9; ++r) v(r) = C64(gauss(rng), gauss(rng));
  return oamtomo::Ket9::normalized(v);
}

inline double max_abs_diff(const Mat9& a, const Mat9& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Noiseless coincidence table: counts = round(N * p_k) for a large N so
// that rounding is negligible against the tolerances under test.
inline oamtomo::CoincidenceTable noiseless_counts(
    const DensityMatrix9& rho, const std::vector<oamtomo::ProjectorSetting>& settings,
    double scale = 1e12) {
  oamtomo::CoincidenceTable table;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const double p =
        (settings[k].op.transpose().cwiseProduct(rho.matrix())).sum().real();
    table.counts[k] = static_cast<std::int64_t>(std::llround(scale * std::max(p, 0.0)));
  }
  table.duration_s = 1.0;
  table.total_trials = static_cast<std::int64_t>(scale);
  return table;
}

}  // namespace testutil
