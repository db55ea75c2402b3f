#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "grape/types.hpp"

namespace grape {

enum class OffsetUnit { hz, ppm };

/// Chain of spin-1/2 nuclei with per-spin offsets and one nearest-neighbour
/// isotropic coupling constant. Offsets are either Hz or ppm; ppm values are
/// resolved against the spectrometer frequency when the drift is built.
struct SpinChainSpec {
  int n_spins = 0;
  std::vector<double> offsets;
  OffsetUnit offset_unit = OffsetUnit::hz;
  double j_hz = 0.0;
  double b1_max_hz = std::numeric_limits<double>::infinity();

  void validate() const {
    if (n_spins < 1) throw std::invalid_argument("SpinChainSpec: n_spins must be >= 1");
    if (static_cast<int>(offsets.size()) != n_spins)
      throw std::invalid_argument("SpinChainSpec: offsets must have exactly n_spins entries");
    for (double v : offsets)
      if (!std::isfinite(v)) throw std::invalid_argument("SpinChainSpec: offsets must be finite");
    if (!std::isfinite(j_hz)) throw std::invalid_argument("SpinChainSpec: j_hz must be finite");
    if (std::isnan(b1_max_hz) || b1_max_hz < 0.0)
      throw std::invalid_argument("SpinChainSpec: b1_max_hz must be >= 0");
  }
};

/// Drift plus control Hamiltonians, all of one Hilbert dimension, in rad/s
/// (controls in rad/s per Hz of amplitude).
struct HamiltonianSet {
  Matrix h0;
  std::vector<Matrix> controls;

  int hilbert_dim() const { return static_cast<int>(h0.rows()); }
  int n_controls() const { return static_cast<int>(controls.size()); }

  void validate() const {
    if (h0.rows() != h0.cols()) throw std::invalid_argument("HamiltonianSet: h0 must be square");
    if (!is_hermitian(h0)) throw std::invalid_argument("HamiltonianSet: h0 must be Hermitian");
    for (const Matrix& hk : controls) {
      if (hk.rows() != h0.rows() || hk.cols() != h0.cols())
        throw std::invalid_argument("HamiltonianSet: control dimension mismatch");
      if (!is_hermitian(hk))
        throw std::invalid_argument("HamiltonianSet: controls must be Hermitian");
    }
  }
};

/// Cartesian spin operators for each spin in the chain, dimension 2^n.
struct SpinOperators {
  std::vector<Matrix> x, y, z;
  int hilbert_dim = 0;
};

namespace detail {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

/// Single-spin operators embedded into the 2^n-dimensional product space,
/// sx = sigma_x/2 etc. Operators on distinct spins commute by construction.
inline SpinOperators spin_operators(int n_spins) {
  if (n_spins < 1) throw std::invalid_argument("spin_operators: n_spins must be >= 1");
  const double dim_check = std::ldexp(1.0, n_spins);
  if (dim_check > static_cast<double>(max_hilbert_dim))
    throw CapacityError("spin_operators: 2^" + std::to_string(n_spins) +
                        " exceeds the dense limit of " + std::to_string(max_hilbert_dim));
  const int dim = 1 << n_spins;

  Matrix sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0.0, 0.5, 0.5, 0.0;
  sy << 0.0, Complex(0.0, -0.5), Complex(0.0, 0.5), 0.0;
  sz << 0.5, 0.0, 0.0, -0.5;

  SpinOperators ops;
  ops.hilbert_dim = dim;
  ops.x.reserve(n_spins);
  ops.y.reserve(n_spins);
  ops.z.reserve(n_spins);
  for (int i = 0; i < n_spins; ++i) {
    const int left = 1 << i;
    const int right = 1 << (n_spins - i - 1);
    const Matrix eye_left = Matrix::Identity(left, left);
    const Matrix eye_right = Matrix::Identity(right, right);
    ops.x.push_back(detail::kron(detail::kron(eye_left, sx), eye_right));
    ops.y.push_back(detail::kron(detail::kron(eye_left, sy), eye_right));
    ops.z.push_back(detail::kron(detail::kron(eye_left, sz), eye_right));
  }
  return ops;
}

/// Drift Hamiltonian in rad/s: Zeeman offsets plus full isotropic
/// nearest-neighbour exchange 2*pi*J (SxSx + SySy + SzSz).
inline Matrix build_drift(const SpinChainSpec& spec, double spectrometer_mhz = 0.0) {
  spec.validate();
  if (spec.offset_unit == OffsetUnit::ppm &&
      (!std::isfinite(spectrometer_mhz) || spectrometer_mhz <= 0.0))
    throw std::invalid_argument("build_drift: ppm offsets need a positive spectrometer frequency");

  const SpinOperators ops = spin_operators(spec.n_spins);
  Matrix h0 = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
  for (int i = 0; i < spec.n_spins; ++i) {
    double offset_hz = spec.offsets[static_cast<std::size_t>(i)];
    if (spec.offset_unit == OffsetUnit::ppm) offset_hz *= spectrometer_mhz;  // 1 ppm = f0 Hz
    h0 += (two_pi * offset_hz) * ops.z[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i + 1 < spec.n_spins; ++i) {
    const auto a = static_cast<std::size_t>(i);
    h0 += (two_pi * spec.j_hz) *
          (ops.x[a] * ops.x[a + 1] + ops.y[a] * ops.y[a + 1] + ops.z[a] * ops.z[a + 1]);
  }
  return h0;
}

/// Global x/y control Hamiltonians, 2*pi*sum_i S{x,y}_i, so an amplitude of
/// c Hz nutates at c Hz.
inline std::vector<Matrix> build_controls(int n_spins) {
  const SpinOperators ops = spin_operators(n_spins);
  Matrix hx = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
  Matrix hy = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
  for (int i = 0; i < n_spins; ++i) {
    hx += two_pi * ops.x[static_cast<std::size_t>(i)];
    hy += two_pi * ops.y[static_cast<std::size_t>(i)];
  }
  return {hx, hy};
}

/// Drift + x/y controls for a spin chain, ready for Liouville-space lifting.
inline HamiltonianSet build_hamiltonians(const SpinChainSpec& spec, double spectrometer_mhz = 0.0) {
  HamiltonianSet set;
  set.h0 = build_drift(spec, spectrometer_mhz);
  set.controls = build_controls(spec.n_spins);
  return set;
}

}  // namespace grape
