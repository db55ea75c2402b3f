#pragma once

#include <cmath>
#include <vector>

#include "grape/spin_system.hpp"
#include "grape/types.hpp"

namespace grape {

/// Column-major stacking of a density matrix into a d^2 vector.
inline Vector vectorize(const Matrix& rho) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("vectorize: matrix must be square");
  return Eigen::Map<const Vector>(rho.data(), rho.size());
}

/// Inverse of vectorize; the input length must be a perfect square.
inline Matrix devectorize(const Vector& v) {
  const auto dim = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (dim * dim != v.size())
    throw std::invalid_argument("devectorize: length is not a perfect square");
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

/// Commutator superoperator E (x) H - H^T (x) E, so that
/// L * vec(rho) = vec(H rho - rho H) under column-major stacking.
inline Matrix commutation_superoperator(const Matrix& h) {
  if (h.rows() != h.cols())
    throw std::invalid_argument("commutation_superoperator: matrix must be square");
  const Eigen::Index d = h.rows();
  const Matrix eye = Matrix::Identity(d, d);
  return detail::kron(eye, h) - detail::kron(h.transpose(), eye);
}

/// Liouvillian E (x) H - H^T (x) E + iR. Pass an empty (0x0) r for no
/// relaxation.
inline Matrix to_liouvillian(const Matrix& h, const Matrix& r = Matrix()) {
  Matrix l = commutation_superoperator(h);
  if (r.size() != 0) {
    if (r.rows() != l.rows() || r.cols() != l.cols())
      throw std::invalid_argument("to_liouvillian: relaxation matrix must be d^2 x d^2");
    l += Complex(0.0, 1.0) * r;
  }
  return l;
}

/// Relaxation superoperator damping every component orthogonal to the unit
/// operator at `rate` (1/s): R = -rate * (E - |1><1|/d).
inline Matrix uniform_damping(int hilbert_dim, double rate) {
  if (hilbert_dim < 1) throw std::invalid_argument("uniform_damping: dimension must be >= 1");
  if (!(rate >= 0.0)) throw std::invalid_argument("uniform_damping: rate must be >= 0");
  const Eigen::Index d2 = static_cast<Eigen::Index>(hilbert_dim) * hilbert_dim;
  const Vector unit = vectorize(Matrix::Identity(hilbert_dim, hilbert_dim));
  Matrix r = Matrix::Identity(d2, d2) - (unit * unit.adjoint()) / static_cast<double>(hilbert_dim);
  r *= -rate;
  return r;
}

/// Liouville-space generators: l0 carries the drift commutator plus iR, one
/// control superoperator per control Hamiltonian. relaxation stays separate
/// so zero-relaxation structure remains detectable.
struct LiouvillianSet {
  Matrix l0;
  std::vector<Matrix> controls;
  Matrix relaxation;  // empty when none

  int dim() const { return static_cast<int>(l0.rows()); }
  int n_controls() const { return static_cast<int>(controls.size()); }
  bool has_relaxation() const {
    return relaxation.size() != 0 && relaxation.cwiseAbs().maxCoeff() > 0.0;
  }
};

inline LiouvillianSet build_liouvillians(const HamiltonianSet& hams, const Matrix& r = Matrix()) {
  hams.validate();
  LiouvillianSet set;
  set.l0 = to_liouvillian(hams.h0, r);
  set.controls.reserve(hams.controls.size());
  for (const Matrix& hk : hams.controls) set.controls.push_back(commutation_superoperator(hk));
  set.relaxation = r;
  return set;
}

}  // namespace grape
