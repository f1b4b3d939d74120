#include "oamtomo/exp_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "oamtomo/rng.hpp"

namespace oamtomo {

namespace {

constexpr double kPi = std::numbers::pi;

struct CountSplit {
  std::array<double, 81> signal{};
  std::array<double, 81> accidental{};
};

// Genuine-pair and accidental expectations per setting. The accidental
// term multiplies the two arms' independent click probabilities.
CountSplit expected_split(const SourceModel& model,
                          const std::vector<ProjectorSetting>& settings) {
  model.validate();
  if (settings.size() != 81) {
    throw std::invalid_argument("expected_counts: expected 81 settings");
  }
  const double n_trials = static_cast<double>(model.trials());
  const double p = model.excitation_prob;
  const double eta = model.retrieval_eff;
  const Mat9& rho = model.rho_true.matrix();
  const Mat3 rho_photon = partial_trace(model.rho_true, Subsystem::photon);
  const Mat3 rho_atom = partial_trace(model.rho_true, Subsystem::atom);

  CountSplit split;
  for (int k = 0; k < 81; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Mat9& op = settings[ku].op;
    const double joint =
        std::max(0.0, op.transpose().cwiseProduct(rho).sum().real());
    const Mat3 op_photon = partial_trace_matrix(op, Subsystem::photon);
    const Mat3 op_atom = partial_trace_matrix(op, Subsystem::atom);
    const double q_s =
        std::max(0.0, op_photon.transpose().cwiseProduct(rho_photon).sum().real());
    const double q_a =
        std::max(0.0, op_atom.transpose().cwiseProduct(rho_atom).sum().real());
    split.signal[ku] = n_trials * eta * p * joint;
    split.accidental[ku] = n_trials * (p * q_s + model.bg_stokes_at(k)) *
                           (eta * p * q_a + model.bg_antistokes_at(k));
  }
  return split;
}

}  // namespace

void SourceModel::validate() const {
  if (!(excitation_prob > 0.0 && excitation_prob < 0.05)) {
    throw std::invalid_argument(
        "SourceModel: excitation probability must lie in (0, 0.05)");
  }
  if (!(retrieval_eff > 0.0 && retrieval_eff <= 1.0)) {
    throw std::invalid_argument("SourceModel: retrieval efficiency must lie in (0, 1]");
  }
  if (!(bg_stokes >= 0.0 && bg_stokes < 1.0) ||
      !(bg_antistokes >= 0.0 && bg_antistokes < 1.0)) {
    throw std::invalid_argument("SourceModel: background rates must lie in [0, 1)");
  }
  if (!(rep_period_ns > 0.0) || !std::isfinite(rep_period_ns)) {
    throw std::invalid_argument("SourceModel: repetition period must be positive");
  }
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("SourceModel: duration must be positive");
  }
  for (const auto* override_vec : {&bg_stokes_override, &bg_antistokes_override}) {
    if (!override_vec->empty() && override_vec->size() != 81) {
      throw std::invalid_argument(
          "SourceModel: per-setting background override must hold 81 entries");
    }
    for (const double v : *override_vec) {
      if (!(v >= 0.0 && v < 1.0)) {
        throw std::invalid_argument(
            "SourceModel: per-setting background rates must lie in [0, 1)");
      }
    }
  }
}

std::int64_t SourceModel::trials() const {
  return std::llround(duration_s / (rep_period_ns * 1e-9));
}

double SourceModel::bg_stokes_at(int k) const {
  if (k < 0 || k >= 81) {
    throw std::invalid_argument("SourceModel: setting index out of range");
  }
  return bg_stokes_override.empty() ? bg_stokes
                                    : bg_stokes_override[static_cast<std::size_t>(k)];
}

double SourceModel::bg_antistokes_at(int k) const {
  if (k < 0 || k >= 81) {
    throw std::invalid_argument("SourceModel: setting index out of range");
  }
  return bg_antistokes_override.empty()
             ? bg_antistokes
             : bg_antistokes_override[static_cast<std::size_t>(k)];
}

std::array<double, 81> expected_counts(const SourceModel& model,
                                       const std::vector<ProjectorSetting>& settings) {
  const CountSplit split = expected_split(model, settings);
  std::array<double, 81> out{};
  for (std::size_t k = 0; k < 81; ++k) {
    out[k] = split.signal[k] + split.accidental[k];
  }
  return out;
}

CoincidenceTable sample_counts(const SourceModel& model,
                               const std::vector<ProjectorSetting>& settings,
                               std::uint64_t seed) {
  const CountSplit split = expected_split(model, settings);
  CoincidenceTable table;
  table.duration_s = model.duration_s;
  table.total_trials = model.trials();
  table.background.resize(81);
  for (int k = 0; k < 81; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double lam = split.signal[ku] + split.accidental[ku];
    table.background[ku] = split.accidental[ku];
    if (lam > 0.0) {
      auto eng = detail::make_engine(detail::sub_seed(seed, 3, ku));
      std::poisson_distribution<std::int64_t> pois(lam);
      table.counts[ku] = pois(eng);
    } else {
      table.counts[ku] = 0;
    }
  }
  return table;
}

double g2_model(double p, double eta, double bg_s, double bg_as) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("g2_model: excitation probability must lie in (0, 1)");
  }
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("g2_model: retrieval efficiency must lie in (0, 1]");
  }
  if (!(bg_s >= 0.0) || !(bg_as >= 0.0)) {
    throw std::invalid_argument("g2_model: background rates must be nonnegative");
  }
  return 1.0 + eta * p / ((p + bg_s) * (eta * p + bg_as));
}

double g2_invert(double target_g2, double p, double eta, bool symmetric_bg) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("g2_invert: excitation probability must lie in (0, 1)");
  }
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("g2_invert: retrieval efficiency must lie in (0, 1]");
  }
  if (!(target_g2 > 1.0)) {
    throw std::invalid_argument("g2_invert: target g2 must exceed 1");
  }
  const double ceiling = 1.0 + 1.0 / p;
  if (target_g2 > ceiling * (1.0 + 1e-12)) {
    throw std::invalid_argument(
        "g2_invert: target exceeds the background-free value 1 + 1/p");
  }
  double bg;
  if (!symmetric_bg) {
    // All background on the Stokes arm: g2 = 1 + 1/(p + bg).
    bg = 1.0 / (target_g2 - 1.0) - p;
  } else {
    // Equal background in both arms: (p + bg)(eta p + bg) = eta p / (g2 - 1).
    const double c = eta * p * p - eta * p / (target_g2 - 1.0);
    const double half_b = 0.5 * p * (1.0 + eta);
    bg = -half_b + std::sqrt(half_b * half_b - c);
  }
  if (bg < 0.0) {
    if (bg < -1e-12) {
      throw std::invalid_argument("g2_invert: no nonnegative background reproduces the target");
    }
    bg = 0.0;
  }
  return bg;
}

double g2_estimate(std::int64_t stokes_singles, std::int64_t antistokes_singles,
                   std::int64_t coincidences, std::int64_t trials) {
  if (coincidences < 0) {
    throw std::invalid_argument("g2_estimate: coincidences must be nonnegative");
  }
  if (stokes_singles <= 0 || antistokes_singles <= 0 || trials <= 0) {
    throw std::invalid_argument("g2_estimate: singles and trials must be positive");
  }
  return static_cast<double>(coincidences) * static_cast<double>(trials) /
         (static_cast<double>(stokes_singles) * static_cast<double>(antistokes_singles));
}

DensityMatrix9 planted_state(double alpha, double beta, double target_fidelity,
                             const std::array<double, 3>& major_diagonals) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument("planted_state: phases must be finite");
  }
  for (const double d : major_diagonals) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("planted_state: major populations must be positive");
    }
  }
  const double d_lr = major_diagonals[0];
  const double d_gg = major_diagonals[1];
  const double d_rl = major_diagonals[2];
  const double s = d_lr + d_gg + d_rl;
  if (s > 1.0 + 1e-12) {
    throw std::invalid_argument("planted_state: major populations exceed unit trace");
  }
  const double sqrt_sum = std::sqrt(d_lr) + std::sqrt(d_gg) + std::sqrt(d_rl);
  const double overlap = sqrt_sum * sqrt_sum / (3.0 * s);
  const double f_min = s / 3.0;
  const double f_max = s * overlap;
  if (!(target_fidelity >= f_min - 1e-12 && target_fidelity <= f_max + 1e-12)) {
    throw std::invalid_argument(
        "planted_state: target fidelity must lie in [" + std::to_string(f_min) +
        ", " + std::to_string(f_max) + "] for these populations");
  }
  const double a = std::clamp((target_fidelity - f_min) / (overlap - 1.0 / 3.0),
                              0.0, s);
  const double b = s - a;
  const double c = 1.0 - std::min(s, 1.0);

  const int i_lr = joint_index(basis::L, basis::r);
  const int i_gg = joint_index(basis::G, basis::g);
  const int i_rl = joint_index(basis::R, basis::l);

  Vec9 psi = Vec9::Zero();
  psi[i_lr] = std::polar(std::sqrt(d_lr / s), kPi * alpha);
  psi[i_gg] = std::sqrt(d_gg / s);
  psi[i_rl] = std::polar(std::sqrt(d_rl / s), kPi * beta);

  Mat9 rho = a * (psi * psi.adjoint());
  rho(i_lr, i_lr) += b * d_lr / s;
  rho(i_gg, i_gg) += b * d_gg / s;
  rho(i_rl, i_rl) += b * d_rl / s;
  for (int k = 0; k < 9; ++k) {
    if (k == i_lr || k == i_gg || k == i_rl) continue;
    rho(k, k) += c / 6.0;
  }
  return DensityMatrix9::from(rho);
}

}  // namespace oamtomo
