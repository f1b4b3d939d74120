#pragma once

#include <complex>
#include <Eigen/Dense>

namespace oamtomo {

using C64 = std::complex<double>;
using Vec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3cd;
using Vec9 = Eigen::Matrix<C64, 9, 1>;
using Mat9 = Eigen::Matrix<C64, 9, 9>;

// Which half of the photon-atom pair a single-qutrit object lives on.
enum class Subsystem { photon, atom };

// Basis ordering for both qutrits. The photon arm is spanned by the
// orbital-angular-momentum states L (m = -1), G (m = 0), R (m = +1); the
// atomic arm by the matching collective excitations l, g, r. Joint indices
// are photon-major: |photon p, atom a> sits at 3*p + a.
namespace basis {
enum Photon : int { L = 0, G = 1, R = 2 };
enum Atom : int { l = 0, g = 1, r = 2 };
}  // namespace basis

constexpr int joint_index(int photon, int atom) { return 3 * photon + atom; }

// Normalized single-qutrit ket tagged with the subsystem it belongs to.
struct Ket3 {
  Vec3 amplitudes;
  Subsystem side;

  // Normalizes the given amplitudes; throws std::invalid_argument on a
  // zero vector.
  static Ket3 normalized(const Vec3& amplitudes, Subsystem side);
};

// Normalized two-qutrit ket (photon-major component order).
struct Ket9 {
  Vec9 amplitudes;

  static Ket9 normalized(const Vec9& amplitudes);
};

// 9x9 density matrix with validated invariants: Hermitian to 1e-10,
// unit trace to 1e-10, and no eigenvalue below -1e-9. The stored matrix
// is the Hermitian part of the input; entries are otherwise unmodified.
class DensityMatrix9 {
 public:
  static DensityMatrix9 from(const Mat9& rho);
  static DensityMatrix9 pure(const Ket9& psi);
  static DensityMatrix9 maximally_mixed();

  const Mat9& matrix() const { return rho_; }

 private:
  explicit DensityMatrix9(const Mat9& rho) : rho_(rho) {}
  Mat9 rho_;
};

// |photon> (x) |atom>. Throws if the kets are tagged with the wrong sides.
Ket9 tensor(const Ket3& photon, const Ket3& atom);

// Kronecker product with the same photon-major convention as tensor().
Mat9 kron(const Mat3& photon_op, const Mat3& atom_op);

// Rank-1 projectors |k><k|.
Mat3 projector(const Ket3& k);
Mat9 projector(const Ket9& k);

// <psi| rho |psi> for a pure target. The imaginary residual must stay
// below 1e-12 (it is discarded after the check).
double fidelity_pure(const DensityMatrix9& rho, const Ket9& psi);

// Reduced 3x3 state of the subsystem named by `keep`.
Mat3 partial_trace(const DensityMatrix9& rho, Subsystem keep);

// Same contraction for an arbitrary 9x9 operator (used to reduce
// measurement projectors as well as states).
Mat3 partial_trace_matrix(const Mat9& op, Subsystem keep);

// Number of Schmidt coefficients of |psi> above tol relative to the
// largest one, computed from the SVD of the 3x3 amplitude matrix.
int schmidt_rank(const Ket9& psi, double tol = 1e-7);

// (1/2) || a - b ||_1 for Hermitian a, b.
double trace_distance(const Mat9& a, const Mat9& b);

}  // namespace oamtomo
