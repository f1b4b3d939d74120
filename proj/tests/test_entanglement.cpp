#include <doctest.h>

#include <cmath>
#include <random>

#include "oamtomo/entanglement.hpp"
#include "oamtomo/exp_sim.hpp"
#include "test_util.hpp"

using namespace oamtomo;

TEST_CASE("mes state lives on the correlated triple") {
  const Ket9 psi = mes_state(MesParams{0.25, -0.5});
  CHECK(std::abs(psi.amplitudes.norm() - 1.0) < 1e-15);
  for (int k = 0; k < 9; ++k) {
    const double mag = std::abs(psi.amplitudes(k));
    if (k == 2 || k == 4 || k == 6) {
      CHECK(mag == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    } else {
      CHECK(mag == 0.0);
    }
  }
  // Component phases: e^{i alpha pi} on |L r>, 1 on |G g>, e^{i beta pi}
  // on |R l>.
  const C64 ref = psi.amplitudes(4);
  CHECK(std::arg(psi.amplitudes(2) / ref) == doctest::Approx(0.25 * M_PI).epsilon(1e-12));
  CHECK(std::arg(psi.amplitudes(6) / ref) == doctest::Approx(-0.5 * M_PI).epsilon(1e-12));
}

TEST_CASE("closed form fidelity matches the quadratic form") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> phase(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix9 rho = testutil::random_state(rng);
    const MesParams params{phase(rng), phase(rng)};
    const double closed = mes_fidelity(rho, params);
    const double direct = fidelity_pure(rho, mes_state(params));
    CHECK(closed == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("witness operator spectrum and identity") {
  const MesParams params{0.3, 0.7};
  const Mat9 w = witness_operator(params);
  Eigen::SelfAdjointEigenSolver<Mat9> es(w);
  CHECK(es.eigenvalues()(0) == doctest::Approx(-0.5).epsilon(1e-13));
  for (int k = 1; k < 9; ++k) {
    CHECK(es.eigenvalues()(k) == doctest::Approx(1.0).epsilon(1e-13));
  }

  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix9 rho = testutil::random_state(rng);
    const double via_op = (w * rho.matrix()).trace().real();
    const double via_fid = 1.0 - 1.5 * mes_fidelity(rho, params);
    CHECK(std::abs(via_op - via_fid) < 1e-12);
  }
}

TEST_CASE("phase optimization recovers planted targets") {
  SUBCASE("pure states at interior phases") {
    for (const auto& [a, b] : {std::pair{0.019, -0.058}, std::pair{0.4, 0.9},
                               std::pair{-0.77, 0.13}}) {
      const DensityMatrix9 rho = DensityMatrix9::pure(mes_state(MesParams{a, b}));
      const MesOptimum opt = optimize_mes(rho);
      CHECK(opt.fidelity == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(opt.params.alpha == doctest::Approx(a).epsilon(1e-8));
      CHECK(opt.params.beta == doctest::Approx(b).epsilon(1e-8));
    }
  }
  SUBCASE("phases at the wrap point map into the half open interval") {
    const DensityMatrix9 rho = DensityMatrix9::pure(mes_state(MesParams{1.0, -1.0}));
    const MesOptimum opt = optimize_mes(rho);
    CHECK(opt.fidelity == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(opt.params.alpha) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(opt.params.alpha <= 1.0);
    CHECK(opt.params.alpha > -1.0);
    CHECK(std::abs(opt.params.beta) == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("mixed planted state keeps its fidelity and phases") {
    const DensityMatrix9 rho = planted_state(0.25, -0.4, 0.71, {0.25, 0.37, 0.26});
    const MesOptimum opt = optimize_mes(rho);
    CHECK(opt.fidelity == doctest::Approx(0.71).epsilon(1e-10));
    CHECK(opt.params.alpha == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(opt.params.beta == doctest::Approx(-0.4).epsilon(1e-7));
  }
  SUBCASE("refinement never lands below the best grid point") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 5; ++trial) {
      const DensityMatrix9 rho = testutil::random_state(rng);
      const MesOptimum coarse = optimize_mes(rho, 9);
      const MesOptimum fine = optimize_mes(rho, 721);
      CHECK(fine.fidelity >= coarse.fidelity - 1e-12);
      CHECK(mes_fidelity(rho, fine.params) ==
            doctest::Approx(fine.fidelity).epsilon(1e-12));
    }
  }
  SUBCASE("grid size is validated") {
    const DensityMatrix9 rho = DensityMatrix9::maximally_mixed();
    CHECK_THROWS_AS(optimize_mes(rho, 1), std::invalid_argument);
    CHECK_THROWS_AS(optimize_mes(rho, 200000), std::invalid_argument);
  }
  SUBCASE("flat landscape reports the uniform fidelity") {
    const MesOptimum opt = optimize_mes(DensityMatrix9::maximally_mixed());
    CHECK(opt.fidelity == doctest::Approx(1.0 / 9.0).epsilon(1e-10));
  }
}

TEST_CASE("witness report certification logic") {
  SUBCASE("maximally entangled state certifies") {
    const DensityMatrix9 rho = DensityMatrix9::pure(mes_state(MesParams{0.0, 0.0}));
    const WitnessReport rep = witness_report(rho);
    CHECK(rep.fidelity == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rep.witness == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(rep.certified);
    CHECK_FALSE(rep.ci.has_value());
  }
  SUBCASE("maximally mixed state does not certify") {
    const WitnessReport rep = witness_report(DensityMatrix9::maximally_mixed());
    CHECK(rep.fidelity == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
    CHECK(rep.witness > 0.0);
    CHECK_FALSE(rep.certified);
  }
  SUBCASE("an interval crossing zero blocks certification") {
    const DensityMatrix9 rho = DensityMatrix9::pure(mes_state(MesParams{0.1, 0.2}));
    const WitnessReport with_good =
        witness_report(rho, ConfidenceInterval{-0.55, -0.45});
    CHECK(with_good.certified);
    const WitnessReport with_bad =
        witness_report(rho, ConfidenceInterval{-0.55, 0.01});
    CHECK_FALSE(with_bad.certified);
    REQUIRE(with_bad.ci.has_value());
    CHECK(with_bad.ci->high == 0.01);
  }
  SUBCASE("inverted intervals are rejected") {
    const DensityMatrix9 rho = DensityMatrix9::maximally_mixed();
    CHECK_THROWS_AS(witness_report(rho, ConfidenceInterval{0.2, -0.2}),
                    std::invalid_argument);
  }
}

TEST_CASE("local filtering balances the major populations") {
  const DensityMatrix9 rho = planted_state(0.019, -0.058, 0.74, {0.22, 0.41, 0.24});
  const DensityMatrix9 filtered = local_filter_balance(rho);
  const Mat9& m = filtered.matrix();
  const double d_lr = m(2, 2).real();
  const double d_gg = m(4, 4).real();
  const double d_rl = m(6, 6).real();
  CHECK(std::abs(m.trace().real() - 1.0) < 1e-12);
  CHECK(d_lr == doctest::Approx(d_gg).epsilon(1e-12));
  CHECK(d_rl == doctest::Approx(d_gg).epsilon(1e-12));

  // Filtering is local, so it cannot manufacture entanglement where
  // there is none.
  Vec9 product = Vec9::Zero();
  product(joint_index(basis::L, basis::r)) = 1.0;
  const Ket9 pure_product = Ket9::normalized(product);
  CHECK_THROWS_AS(local_filter_balance(DensityMatrix9::pure(pure_product)),
                  std::invalid_argument);
}

TEST_CASE("residual weight complements the major populations") {
  const DensityMatrix9 planted = planted_state(0.0, 0.0, 0.74, {0.25, 0.37, 0.26});
  CHECK(residual_weight(planted) == doctest::Approx(0.12).epsilon(1e-12));
  const DensityMatrix9 mes = DensityMatrix9::pure(mes_state(MesParams{0.3, -0.3}));
  CHECK(residual_weight(mes) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(residual_weight(DensityMatrix9::maximally_mixed()) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}
