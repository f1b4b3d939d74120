#include <doctest.h>

#include <cmath>

#include "oamtomo/measurement.hpp"
#include "oamtomo/tomography.hpp"
#include "test_util.hpp"

using namespace oamtomo;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

bool close(const C64& a, const C64& b) { return std::abs(a - b) < 1e-14; }

}  // namespace

TEST_CASE("analysis kets match the intended superpositions") {
  const auto photon = photon_kets();
  const auto atom = atom_kets();
  REQUIRE(photon.size() == 9);
  REQUIRE(atom.size() == 9);
  for (const auto& k : photon) {
    CHECK(std::abs(k.amplitudes.norm() - 1.0) < 1e-14);
    CHECK(k.side == Subsystem::photon);
  }
  for (const auto& k : atom) {
    CHECK(std::abs(k.amplitudes.norm() - 1.0) < 1e-14);
    CHECK(k.side == Subsystem::atom);
  }

  // First three are the basis states on both sides.
  for (int b = 0; b < 3; ++b) {
    for (int c = 0; c < 3; ++c) {
      CHECK(close(photon[b].amplitudes(c), b == c ? 1.0 : 0.0));
      CHECK(close(atom[b].amplitudes(c), b == c ? 1.0 : 0.0));
    }
  }

  // Photon side: (L+G)/sqrt2, (G+R)/sqrt2, (iL+G)/sqrt2, (G-iR)/sqrt2,
  // (L+R)/sqrt2, (L+iR)/sqrt2.
  CHECK(close(photon[3].amplitudes(0), kInvSqrt2));
  CHECK(close(photon[3].amplitudes(1), kInvSqrt2));
  CHECK(close(photon[4].amplitudes(1), kInvSqrt2));
  CHECK(close(photon[4].amplitudes(2), kInvSqrt2));
  CHECK(close(photon[5].amplitudes(0), C64(0.0, kInvSqrt2)));
  CHECK(close(photon[5].amplitudes(1), kInvSqrt2));
  CHECK(close(photon[6].amplitudes(1), kInvSqrt2));
  CHECK(close(photon[6].amplitudes(2), C64(0.0, -kInvSqrt2)));
  CHECK(close(photon[7].amplitudes(0), kInvSqrt2));
  CHECK(close(photon[7].amplitudes(2), kInvSqrt2));
  CHECK(close(photon[8].amplitudes(0), kInvSqrt2));
  CHECK(close(photon[8].amplitudes(2), C64(0.0, kInvSqrt2)));

  // Atom side mirrors the photon list with conjugated phases.
  CHECK(close(atom[5].amplitudes(0), C64(0.0, -kInvSqrt2)));
  CHECK(close(atom[5].amplitudes(1), kInvSqrt2));
  CHECK(close(atom[6].amplitudes(1), kInvSqrt2));
  CHECK(close(atom[6].amplitudes(2), C64(0.0, kInvSqrt2)));
  CHECK(close(atom[8].amplitudes(0), kInvSqrt2));
  CHECK(close(atom[8].amplitudes(2), C64(0.0, -kInvSqrt2)));
  for (int idx : {3, 4, 7}) {
    for (int c = 0; c < 3; ++c) {
      CHECK(close(atom[static_cast<std::size_t>(idx)].amplitudes(c),
                  photon[static_cast<std::size_t>(idx)].amplitudes(c)));
    }
  }
}

TEST_CASE("projector set covers all joint settings with rank one projectors") {
  const auto settings = projector_set();
  REQUIRE(settings.size() == 81);
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const auto& s = settings[k];
    CHECK(s.index.i == static_cast<int>(k) / 9);
    CHECK(s.index.j == static_cast<int>(k) % 9);
    CHECK(s.ideal);
    CHECK((s.op - s.op.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(s.op.trace().real() - 1.0) < 1e-13);
    CHECK((s.op * s.op - s.op).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("joint settings span the full operator space") {
  const Eigen::MatrixXcd m = measurement_matrix(projector_set());
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  CHECK(sv(sv.size() - 1) > 1e-6 * sv(0));
}

TEST_CASE("born probabilities for the symmetric entangled state") {
  Vec9 v = Vec9::Zero();
  v(joint_index(basis::L, basis::r)) = 1.0;
  v(joint_index(basis::G, basis::g)) = 1.0;
  v(joint_index(basis::R, basis::l)) = 1.0;
  const DensityMatrix9 rho = DensityMatrix9::pure(Ket9::normalized(v));
  const auto settings = projector_set();
  const auto prob = [&](int i, int j) {
    const Mat9& op = settings[static_cast<std::size_t>(9 * i + j)].op;
    return (op.transpose().cwiseProduct(rho.matrix())).sum().real();
  };
  // Correlated basis pairs fire with probability 1/3, anticorrelated
  // pairs never.
  CHECK(std::abs(prob(0, 2) - 1.0 / 3.0) < 1e-14);
  CHECK(std::abs(prob(1, 1) - 1.0 / 3.0) < 1e-14);
  CHECK(std::abs(prob(2, 0) - 1.0 / 3.0) < 1e-14);
  CHECK(std::abs(prob(0, 0)) < 1e-14);
  CHECK(std::abs(prob(1, 2)) < 1e-14);
  // Setting (L+G)/sqrt2 against (l+g)/sqrt2 keeps only the |G g>
  // component: amplitude (1/2)(1/sqrt3).
  CHECK(std::abs(prob(3, 3) - 1.0 / 12.0) < 1e-14);
}

TEST_CASE("setting perturbation") {
  const auto settings = projector_set();
  const auto& s = settings[40];

  SUBCASE("zero strength returns the ideal setting") {
    const auto same = perturb_setting(s, 0.0, 99);
    CHECK(same.ideal);
    CHECK(testutil::max_abs_diff(same.op, s.op) == 0.0);
  }
  SUBCASE("strength is validated") {
    CHECK_THROWS_AS(perturb_setting(s, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(perturb_setting(s, 1.1, 1), std::invalid_argument);
  }
  SUBCASE("perturbed operator stays a physical effect") {
    const auto p = perturb_setting(s, 0.3, 5);
    CHECK_FALSE(p.ideal);
    CHECK((p.op - p.op.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
    Eigen::SelfAdjointEigenSolver<Mat9> es(p.op);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    CHECK(std::abs(p.op.trace().real() - 1.0) < 1e-12);
    CHECK(testutil::max_abs_diff(p.op, s.op) > 1e-3);
  }
  SUBCASE("small strength stays close to ideal") {
    const auto p = perturb_setting(s, 1e-3, 5);
    CHECK(testutil::max_abs_diff(p.op, s.op) < 5e-3);
  }
  SUBCASE("deterministic in the seed and not compounding") {
    const auto a = perturb_setting(s, 0.2, 17);
    const auto b = perturb_setting(s, 0.2, 17);
    CHECK(testutil::max_abs_diff(a.op, b.op) == 0.0);
    const auto again = perturb_setting(a, 0.2, 17);
    CHECK(testutil::max_abs_diff(again.op, a.op) < 1e-15);
    const auto other = perturb_setting(s, 0.2, 18);
    CHECK(testutil::max_abs_diff(other.op, a.op) > 1e-6);
  }
  SUBCASE("different settings draw independent noise") {
    // Settings 40 and 41 share the photon arm, so any difference in the
    // photon marginal comes from the per-setting noise stream.
    const auto a = perturb_setting(settings[40], 0.2, 17);
    const auto b = perturb_setting(settings[41], 0.2, 17);
    const Mat3 ma = partial_trace_matrix(a.op, Subsystem::photon);
    const Mat3 mb = partial_trace_matrix(b.op, Subsystem::photon);
    CHECK((ma - mb).cwiseAbs().maxCoeff() > 1e-6);
  }
}
