#include "oamtomo/entanglement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oamtomo {

namespace {

// Joint indices of the three components the target family lives on.
constexpr int kLr = joint_index(basis::L, basis::r);
constexpr int kGg = joint_index(basis::G, basis::g);
constexpr int kRl = joint_index(basis::R, basis::l);

constexpr double kPi = std::numbers::pi;

// Wraps a phase in pi units into (-1, 1].
double wrap_phase(double x) {
  double w = std::fmod(x + 1.0, 2.0);
  if (w <= 0.0) w += 2.0;
  return w - 1.0;
}

struct FidelityTerms {
  double diag = 0.0;  // rho_LrLr + rho_GgGg + rho_RlRl
  C64 z_alpha;        // pairs with e^{-i alpha pi}
  C64 z_beta;         // pairs with e^{+i beta pi}
  C64 z_cross;        // pairs with e^{+i (beta - alpha) pi}
};

FidelityTerms fidelity_terms(const Mat9& rho) {
  FidelityTerms t;
  t.diag = rho(kLr, kLr).real() + rho(kGg, kGg).real() + rho(kRl, kRl).real();
  t.z_alpha = rho(kLr, kGg);
  t.z_beta = rho(kGg, kRl);
  t.z_cross = rho(kLr, kRl);
  return t;
}

double fidelity_from_terms(const FidelityTerms& t, double alpha, double beta) {
  const C64 u = std::polar(1.0, kPi * alpha);
  const C64 v = std::polar(1.0, kPi * beta);
  return (t.diag + 2.0 * (std::conj(u) * t.z_alpha).real() +
          2.0 * (v * t.z_beta).real() +
          2.0 * (std::conj(u) * v * t.z_cross).real()) /
         3.0;
}

// Minimal Nelder-Mead for the 2-D refinement. Minimizes fn.
struct Simplex2 {
  std::array<std::array<double, 2>, 3> pts;
  std::array<double, 3> vals;
};

template <typename Fn>
std::array<double, 2> nelder_mead_2d(Fn&& fn, std::array<double, 2> start,
                                     double scale) {
  Simplex2 sx;
  sx.pts[0] = start;
  sx.pts[1] = {start[0] + scale, start[1]};
  sx.pts[2] = {start[0], start[1] + scale};
  for (int i = 0; i < 3; ++i) sx.vals[i] = fn(sx.pts[i][0], sx.pts[i][1]);

  const auto order = [&sx]() {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(),
              [&sx](int a, int b) { return sx.vals[a] < sx.vals[b]; });
    Simplex2 sorted;
    for (int i = 0; i < 3; ++i) {
      sorted.pts[i] = sx.pts[idx[i]];
      sorted.vals[i] = sx.vals[idx[i]];
    }
    sx = sorted;
  };

  for (int iter = 0; iter < 2000; ++iter) {
    order();
    const double spread = sx.vals[2] - sx.vals[0];
    const double diam = std::max(
        std::hypot(sx.pts[1][0] - sx.pts[0][0], sx.pts[1][1] - sx.pts[0][1]),
        std::hypot(sx.pts[2][0] - sx.pts[0][0], sx.pts[2][1] - sx.pts[0][1]));
    if (spread <= 1e-14 * std::max(1.0, std::abs(sx.vals[0])) && diam <= 1e-9) {
      break;
    }
    const std::array<double, 2> cen{(sx.pts[0][0] + sx.pts[1][0]) / 2.0,
                                    (sx.pts[0][1] + sx.pts[1][1]) / 2.0};
    const auto at = [&cen, &sx](double c) {
      return std::array<double, 2>{cen[0] + c * (cen[0] - sx.pts[2][0]),
                                   cen[1] + c * (cen[1] - sx.pts[2][1])};
    };
    const auto refl = at(1.0);
    const double f_refl = fn(refl[0], refl[1]);
    if (f_refl < sx.vals[0]) {
      const auto exp_pt = at(2.0);
      const double f_exp = fn(exp_pt[0], exp_pt[1]);
      if (f_exp < f_refl) {
        sx.pts[2] = exp_pt;
        sx.vals[2] = f_exp;
      } else {
        sx.pts[2] = refl;
        sx.vals[2] = f_refl;
      }
      continue;
    }
    if (f_refl < sx.vals[1]) {
      sx.pts[2] = refl;
      sx.vals[2] = f_refl;
      continue;
    }
    const auto con = at(f_refl < sx.vals[2] ? 0.5 : -0.5);
    const double f_con = fn(con[0], con[1]);
    if (f_con < std::min(f_refl, sx.vals[2])) {
      sx.pts[2] = con;
      sx.vals[2] = f_con;
      continue;
    }
    for (int i = 1; i < 3; ++i) {
      sx.pts[i] = {(sx.pts[i][0] + sx.pts[0][0]) / 2.0,
                   (sx.pts[i][1] + sx.pts[0][1]) / 2.0};
      sx.vals[i] = fn(sx.pts[i][0], sx.pts[i][1]);
    }
  }
  order();
  return sx.pts[0];
}

}  // namespace

Ket9 mes_state(const MesParams& params) {
  if (!std::isfinite(params.alpha) || !std::isfinite(params.beta)) {
    throw std::invalid_argument("mes_state: phases must be finite");
  }
  Vec9 amps = Vec9::Zero();
  amps[kLr] = std::polar(1.0, kPi * params.alpha);
  amps[kGg] = 1.0;
  amps[kRl] = std::polar(1.0, kPi * params.beta);
  return Ket9::normalized(amps);
}

double mes_fidelity(const DensityMatrix9& rho, const MesParams& params) {
  if (!std::isfinite(params.alpha) || !std::isfinite(params.beta)) {
    throw std::invalid_argument("mes_fidelity: phases must be finite");
  }
  return fidelity_from_terms(fidelity_terms(rho.matrix()), params.alpha, params.beta);
}

MesOptimum optimize_mes(const DensityMatrix9& rho, int grid_samples) {
  if (grid_samples < 2 || grid_samples > 100000) {
    throw std::invalid_argument("optimize_mes: grid_samples out of range");
  }
  const FidelityTerms terms = fidelity_terms(rho.matrix());
  const int n = grid_samples;

  // Grid phase i covers (-1, 1] as -1 + 2 (i + 1) / n. Precompute the
  // alpha-only and beta-only pieces so the double loop is a single
  // complex multiply per cell.
  std::vector<double> alphas(static_cast<std::size_t>(n));
  std::vector<double> betas(static_cast<std::size_t>(n));
  std::vector<double> c_alpha(static_cast<std::size_t>(n));
  std::vector<double> c_beta(static_cast<std::size_t>(n));
  std::vector<C64> v_beta(static_cast<std::size_t>(n));
  std::vector<C64> w_cross(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const double phase = -1.0 + 2.0 * static_cast<double>(i + 1) / n;
    alphas[iu] = phase;
    betas[iu] = phase;
    const C64 u = std::polar(1.0, kPi * phase);
    c_alpha[iu] = 2.0 * (std::conj(u) * terms.z_alpha).real();
    v_beta[iu] = u;
    c_beta[iu] = 2.0 * (u * terms.z_beta).real();
    w_cross[iu] = std::conj(u) * terms.z_cross;
  }

  double best = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  int best_j = 0;
  for (int i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const double base = terms.diag + c_alpha[iu];
    const C64 w = w_cross[iu];
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double f = base + c_beta[ju] + 2.0 * (w * v_beta[ju]).real();
      if (f > best) {
        best = f;
        best_i = i;
        best_j = j;
      }
    }
  }

  const auto neg_f = [&terms](double a, double b) {
    return -fidelity_from_terms(terms, a, b);
  };
  const auto refined = nelder_mead_2d(
      neg_f,
      {alphas[static_cast<std::size_t>(best_i)], betas[static_cast<std::size_t>(best_j)]},
      2.0 / n);

  MesOptimum opt;
  opt.params.alpha = wrap_phase(refined[0]);
  opt.params.beta = wrap_phase(refined[1]);
  opt.fidelity = fidelity_from_terms(terms, opt.params.alpha, opt.params.beta);
  // The refinement must never undercut the grid.
  const double grid_f = best / 3.0;
  if (opt.fidelity < grid_f) {
    opt.params.alpha = wrap_phase(alphas[static_cast<std::size_t>(best_i)]);
    opt.params.beta = wrap_phase(betas[static_cast<std::size_t>(best_j)]);
    opt.fidelity = grid_f;
  }
  return opt;
}

Mat9 witness_operator(const MesParams& params) {
  return Mat9::Identity() - 1.5 * projector(mes_state(params));
}

WitnessReport witness_report(const DensityMatrix9& rho,
                             std::optional<ConfidenceInterval> witness_ci,
                             int grid_samples) {
  if (witness_ci.has_value() && witness_ci->low > witness_ci->high) {
    throw std::invalid_argument("witness_report: interval bounds are reversed");
  }
  const MesOptimum opt = optimize_mes(rho, grid_samples);
  const Mat9 w = witness_operator(opt.params);
  const double value = (w * rho.matrix()).trace().real();

  WitnessReport report;
  report.alpha = opt.params.alpha;
  report.beta = opt.params.beta;
  report.fidelity = opt.fidelity;
  report.witness = value;
  report.ci = witness_ci;
  report.certified =
      value < 0.0 && (!witness_ci.has_value() || witness_ci->high < 0.0);
  return report;
}

DensityMatrix9 local_filter_balance(const DensityMatrix9& rho) {
  const Mat9& m = rho.matrix();
  const double d_lr = m(kLr, kLr).real();
  const double d_gg = m(kGg, kGg).real();
  const double d_rl = m(kRl, kRl).real();
  if (!(d_lr > 0.0 && d_gg > 0.0 && d_rl > 0.0)) {
    throw std::invalid_argument(
        "local_filter_balance: all three major populations must be positive");
  }
  // Diagonal photon-side attenuation A = diag(a_L, a_G, a_R) with the
  // G channel as the reference; the atom side is untouched.
  const double a_l = std::sqrt(d_gg / d_lr);
  const double a_g = 1.0;
  const double a_r = std::sqrt(d_gg / d_rl);
  Eigen::Matrix<double, 9, 1> scales;
  const std::array<double, 3> photon_scale{a_l, a_g, a_r};
  for (int p = 0; p < 3; ++p) {
    for (int a = 0; a < 3; ++a) {
      scales[joint_index(p, a)] = photon_scale[static_cast<std::size_t>(p)];
    }
  }
  Mat9 filtered = scales.asDiagonal() * m * scales.asDiagonal();
  const double tr = filtered.trace().real();
  if (!(tr > 0.0)) {
    throw std::runtime_error("local_filter_balance: filtered state has zero trace");
  }
  filtered /= tr;
  return DensityMatrix9::from(filtered);
}

double residual_weight(const DensityMatrix9& rho) {
  const Mat9& m = rho.matrix();
  return 1.0 - m(kLr, kLr).real() - m(kGg, kGg).real() - m(kRl, kRl).real();
}

}  // namespace oamtomo
