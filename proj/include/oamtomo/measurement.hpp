#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "oamtomo/qutrit.hpp"

namespace oamtomo {

// Position of a joint setting in the 9x9 analysis grid: i indexes the
// photon-arm ket, j the atom-arm ket.
struct SettingIndex {
  int i = 0;
  int j = 0;
};

// One joint measurement operator. `ideal` is true for the exact
// projector |k_i><k_i| (x) |k_j><k_j| and false once the setting has
// been perturbed to model imperfect analyzers.
struct ProjectorSetting {
  SettingIndex index;
  Mat9 op;
  bool ideal = true;
};

// The nine analysis kets for the photon arm, in the fixed order used
// throughout: the three basis states L, G, R followed by six balanced
// superpositions that pin down the off-diagonal elements.
std::array<Ket3, 9> photon_kets();

// The matching nine analysis kets for the atomic arm.
std::array<Ket3, 9> atom_kets();

// All 81 joint settings in row-major order (setting 9*i + j pairs
// photon ket i with atom ket j). Together these operators are
// informationally complete for two-qutrit states.
std::vector<ProjectorSetting> projector_set();

// Mixes each single-arm projector with a random positive trace-1
// operator: P -> (1 - eps) P + eps N, independently per arm, then
// retensors. eps = 0 returns the setting unchanged. Draws are
// deterministic in (seed, setting index).
ProjectorSetting perturb_setting(const ProjectorSetting& setting, double eps,
                                 std::uint64_t seed);

}  // namespace oamtomo
