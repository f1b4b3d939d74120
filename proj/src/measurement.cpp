#include "oamtomo/measurement.hpp"

#include <cmath>
#include <stdexcept>

#include "oamtomo/rng.hpp"

namespace oamtomo {

namespace {

const C64 kI{0.0, 1.0};

Ket3 pk(C64 aL, C64 aG, C64 aR) {
  return Ket3::normalized(Vec3(aL, aG, aR), Subsystem::photon);
}

Ket3 ak(C64 al, C64 ag, C64 ar) {
  return Ket3::normalized(Vec3(al, ag, ar), Subsystem::atom);
}

// Random positive trace-1 operator N = G G^dag / tr(G G^dag) with G a
// 3x3 matrix of iid standard complex normals.
Mat3 random_positive_trace1(std::uint64_t seed) {
  auto eng = detail::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat3 g;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double re = gauss(eng);
      const double im = gauss(eng);
      g(r, c) = C64(re, im);
    }
  }
  Mat3 n = g * g.adjoint();
  n /= n.trace().real();
  return n;
}

}  // namespace

std::array<Ket3, 9> photon_kets() {
  return {
      pk(1, 0, 0),    // |L>
      pk(0, 1, 0),    // |G>
      pk(0, 0, 1),    // |R>
      pk(1, 1, 0),    // (|G> + |L>)/sqrt2
      pk(0, 1, 1),    // (|G> + |R>)/sqrt2
      pk(kI, 1, 0),   // (|G> + i|L>)/sqrt2
      pk(0, 1, -kI),  // (|G> - i|R>)/sqrt2
      pk(1, 0, 1),    // (|L> + |R>)/sqrt2
      pk(1, 0, kI),   // (|L> + i|R>)/sqrt2
  };
}

std::array<Ket3, 9> atom_kets() {
  return {
      ak(1, 0, 0),    // |l>
      ak(0, 1, 0),    // |g>
      ak(0, 0, 1),    // |r>
      ak(1, 1, 0),    // (|g> + |l>)/sqrt2
      ak(0, 1, 1),    // (|g> + |r>)/sqrt2
      ak(-kI, 1, 0),  // (|g> - i|l>)/sqrt2
      ak(0, 1, kI),   // (|g> + i|r>)/sqrt2
      ak(1, 0, 1),    // (|l> + |r>)/sqrt2
      ak(1, 0, -kI),  // (|l> - i|r>)/sqrt2
  };
}

std::vector<ProjectorSetting> projector_set() {
  const auto ph = photon_kets();
  const auto at = atom_kets();
  std::vector<ProjectorSetting> out;
  out.reserve(81);
  for (int i = 0; i < 9; ++i) {
    const Mat3 pp = projector(ph[i]);
    for (int j = 0; j < 9; ++j) {
      out.push_back(ProjectorSetting{SettingIndex{i, j}, kron(pp, projector(at[j])), true});
    }
  }
  return out;
}

ProjectorSetting perturb_setting(const ProjectorSetting& setting, double eps,
                                 std::uint64_t seed) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("perturb_setting: eps must lie in [0, 1]");
  }
  const auto& idx = setting.index;
  if (idx.i < 0 || idx.i > 8 || idx.j < 0 || idx.j > 8) {
    throw std::invalid_argument("perturb_setting: setting index out of range");
  }
  if (eps == 0.0) return setting;

  // The admixture is taken relative to the ideal single-arm projectors
  // for this index, so perturbing twice does not compound.
  const Mat3 p_photon = projector(photon_kets()[idx.i]);
  const Mat3 p_atom = projector(atom_kets()[idx.j]);
  const std::uint64_t flat = static_cast<std::uint64_t>(9 * idx.i + idx.j);
  const Mat3 n_photon = random_positive_trace1(detail::sub_seed(seed, 0, flat));
  const Mat3 n_atom = random_positive_trace1(detail::sub_seed(seed, 1, flat));
  const Mat3 mixed_photon = (1.0 - eps) * p_photon + eps * n_photon;
  const Mat3 mixed_atom = (1.0 - eps) * p_atom + eps * n_atom;
  return ProjectorSetting{idx, kron(mixed_photon, mixed_atom), false};
}

}  // namespace oamtomo
