#include "oamtomo/qutrit.hpp"

#include <cmath>
#include <stdexcept>

namespace oamtomo {

namespace {

constexpr double kHermTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kEigTol = -1e-9;

}  // namespace

Ket3 Ket3::normalized(const Vec3& amplitudes, Subsystem side) {
  const double n = amplitudes.norm();
  if (n == 0.0 || !std::isfinite(n)) {
    throw std::invalid_argument("Ket3: cannot normalize zero or non-finite amplitudes");
  }
  return Ket3{amplitudes / n, side};
}

Ket9 Ket9::normalized(const Vec9& amplitudes) {
  const double n = amplitudes.norm();
  if (n == 0.0 || !std::isfinite(n)) {
    throw std::invalid_argument("Ket9: cannot normalize zero or non-finite amplitudes");
  }
  return Ket9{amplitudes / n};
}

DensityMatrix9 DensityMatrix9::from(const Mat9& rho) {
  const double herm_err = (rho - rho.adjoint().eval()).cwiseAbs().maxCoeff();
  if (herm_err > kHermTol) {
    throw std::invalid_argument("DensityMatrix9: matrix is not Hermitian (residual " +
                                std::to_string(herm_err) + ")");
  }
  Mat9 h = 0.5 * (rho + rho.adjoint().eval());
  const double tr_err = std::abs(h.trace().real() - 1.0) + std::abs(h.trace().imag());
  if (tr_err > kTraceTol) {
    throw std::invalid_argument("DensityMatrix9: trace deviates from 1 by " +
                                std::to_string(tr_err));
  }
  Eigen::SelfAdjointEigenSolver<Mat9> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("DensityMatrix9: eigenvalue computation failed");
  }
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < kEigTol) {
    throw std::invalid_argument("DensityMatrix9: negative eigenvalue " +
                                std::to_string(min_eig));
  }
  return DensityMatrix9(h);
}

DensityMatrix9 DensityMatrix9::pure(const Ket9& psi) {
  return from(projector(psi));
}

DensityMatrix9 DensityMatrix9::maximally_mixed() {
  return from(Mat9::Identity() / 9.0);
}

Ket9 tensor(const Ket3& photon, const Ket3& atom) {
  if (photon.side != Subsystem::photon || atom.side != Subsystem::atom) {
    throw std::invalid_argument("tensor: arguments must be (photon ket, atom ket)");
  }
  Vec9 out;
  for (int p = 0; p < 3; ++p) {
    for (int a = 0; a < 3; ++a) {
      out[joint_index(p, a)] = photon.amplitudes[p] * atom.amplitudes[a];
    }
  }
  return Ket9{out};
}

Mat9 kron(const Mat3& photon_op, const Mat3& atom_op) {
  Mat9 out;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      out.block<3, 3>(3 * p, 3 * q) = photon_op(p, q) * atom_op;
    }
  }
  return out;
}

Mat3 projector(const Ket3& k) {
  return k.amplitudes * k.amplitudes.adjoint();
}

Mat9 projector(const Ket9& k) {
  return k.amplitudes * k.amplitudes.adjoint();
}

double fidelity_pure(const DensityMatrix9& rho, const Ket9& psi) {
  const C64 f = psi.amplitudes.dot(rho.matrix() * psi.amplitudes);
  if (std::abs(f.imag()) > 1e-12) {
    throw std::runtime_error("fidelity_pure: non-real expectation value");
  }
  return f.real();
}

Mat3 partial_trace_matrix(const Mat9& op, Subsystem keep) {
  Mat3 out = Mat3::Zero();
  if (keep == Subsystem::photon) {
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) {
        for (int a = 0; a < 3; ++a) {
          out(p, q) += op(joint_index(p, a), joint_index(q, a));
        }
      }
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int p = 0; p < 3; ++p) {
          out(a, b) += op(joint_index(p, a), joint_index(p, b));
        }
      }
    }
  }
  return out;
}

Mat3 partial_trace(const DensityMatrix9& rho, Subsystem keep) {
  return partial_trace_matrix(rho.matrix(), keep);
}

int schmidt_rank(const Ket9& psi, double tol) {
  // Reshape amplitudes into the 3x3 coefficient matrix c(p, a); Schmidt
  // coefficients are its singular values.
  Mat3 c;
  for (int p = 0; p < 3; ++p) {
    for (int a = 0; a < 3; ++a) {
      c(p, a) = psi.amplitudes[joint_index(p, a)];
    }
  }
  Eigen::JacobiSVD<Mat3> svd(c);
  const auto& sv = svd.singularValues();
  const double cutoff = tol * sv(0);
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  return rank;
}

double trace_distance(const Mat9& a, const Mat9& b) {
  Mat9 d = a - b;
  d = 0.5 * (d + d.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Mat9> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace oamtomo
