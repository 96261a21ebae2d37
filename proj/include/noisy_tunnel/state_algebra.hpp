#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace noisy_tunnel {

using complex = std::complex<double>;

/// Real Bloch representation rho = (I + Px sx + Py sy + Pz sz) / 2.
struct BlochVector {
  double px = 0.0;
  double py = 0.0;
  double pz = 0.0;

  [[nodiscard]] double norm() const { return std::sqrt(px * px + py * py + pz * pz); }
  [[nodiscard]] double transverse() const { return std::hypot(px, py); }

  friend BlochVector operator-(const BlochVector &a, const BlochVector &b) {
    return {a.px - b.px, a.py - b.py, a.pz - b.pz};
  }
  friend bool operator==(const BlochVector &, const BlochVector &) = default;
};

inline constexpr double kConstructionTolerance = 1e-12;
inline constexpr double kDriftTolerance = 1e-9;

/// 2x2 density matrix in the sigma_z eigenbasis. Entry (0,0) is the
/// population of |1>, the +1 eigenstate of sigma_z; (1,1) that of |0>.
///
/// The type does not enforce physicality: intermediate or deliberately
/// unphysical matrices are representable. Use is_physical() where needed.
class DensityMatrix {
public:
  DensityMatrix() = default;
  DensityMatrix(complex r00, complex r01, complex r10, complex r11)
      : e_{r00, r01, r10, r11} {}

  [[nodiscard]] complex operator()(int row, int col) const { return e_[2 * row + col]; }

  [[nodiscard]] complex trace() const { return e_[0] + e_[3]; }

  [[nodiscard]] bool is_hermitian(double tol = kConstructionTolerance) const {
    return std::abs(e_[0].imag()) <= tol && std::abs(e_[3].imag()) <= tol &&
           std::abs(e_[2] - std::conj(e_[1])) <= tol;
  }

  [[nodiscard]] bool has_unit_trace(double tol = kConstructionTolerance) const {
    return std::abs(trace() - complex{1.0, 0.0}) <= tol;
  }

  /// Hermitian, unit trace and positive semidefinite within tol.
  [[nodiscard]] bool is_physical(double tol = kConstructionTolerance) const {
    if (!is_hermitian(tol) || !has_unit_trace(tol))
      return false;
    const double det = e_[0].real() * e_[3].real() - std::norm(e_[1]);
    return det >= -tol && e_[0].real() >= -tol && e_[3].real() >= -tol;
  }

private:
  complex e_[4] = {};
};

inline DensityMatrix bloch_to_density(const BlochVector &p) {
  const complex off{0.5 * p.px, -0.5 * p.py};
  return {complex{0.5 * (1.0 + p.pz), 0.0}, off, std::conj(off), complex{0.5 * (1.0 - p.pz), 0.0}};
}

/// P_i = Tr(rho sigma_i). Throws std::invalid_argument for non-Hermitian or
/// non-unit-trace input (tolerance 1e-10).
inline BlochVector density_to_bloch(const DensityMatrix &rho) {
  constexpr double tol = 1e-10;
  if (!rho.is_hermitian(tol))
    throw std::invalid_argument("density_to_bloch: matrix is not Hermitian");
  if (!rho.has_unit_trace(tol))
    throw std::invalid_argument("density_to_bloch: trace differs from 1");
  const complex r01 = rho(0, 1);
  return {2.0 * r01.real(), -2.0 * r01.imag(), rho(0, 0).real() - rho(1, 1).real()};
}

enum class CanonicalState { rho1, rho2, rho3 };

inline std::string_view to_string(CanonicalState s) {
  switch (s) {
  case CanonicalState::rho1:
    return "rho1";
  case CanonicalState::rho2:
    return "rho2";
  case CanonicalState::rho3:
    return "rho3";
  }
  return "?";
}

inline CanonicalState parse_canonical_state(std::string_view tag) {
  if (tag == "rho1")
    return CanonicalState::rho1;
  if (tag == "rho2")
    return CanonicalState::rho2;
  if (tag == "rho3")
    return CanonicalState::rho3;
  throw std::invalid_argument("unknown initial state tag '" + std::string(tag) +
                              "' (expected rho1, rho2 or rho3)");
}

inline BlochVector canonical_bloch(CanonicalState s) {
  switch (s) {
  case CanonicalState::rho1:
    return {0.0, 0.0, 1.0};
  case CanonicalState::rho2:
    return {0.0, 1.0, 0.0};
  case CanonicalState::rho3:
    return {0.0, 0.0, -1.0};
  }
  throw std::invalid_argument("unknown canonical state");
}

/// rho1 = |1><1|, rho2 = |psi><psi| with |psi> = (|1> + i|0>)/sqrt2, rho3 = |0><0|.
inline DensityMatrix canonical_state(CanonicalState s) { return bloch_to_density(canonical_bloch(s)); }
inline DensityMatrix canonical_state(std::string_view tag) { return canonical_state(parse_canonical_state(tag)); }

/// Sum of off-diagonal magnitudes in the sigma_z basis.
inline double l1_coherence(const DensityMatrix &rho) { return std::abs(rho(0, 1)) + std::abs(rho(1, 0)); }
inline double l1_coherence(const BlochVector &p) { return p.transverse(); }

namespace detail {
// -x log2 x with the 0 log 0 = 0 convention; tiny negative round-off counts as 0.
inline double entropy_term(double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; }
} // namespace detail

inline double binary_entropy(double p) { return detail::entropy_term(p) + detail::entropy_term(1.0 - p); }

/// von Neumann entropy (base 2) of a qubit state from its Bloch length.
inline double von_neumann_entropy(const BlochVector &p) {
  const double r = std::min(p.norm(), 1.0);
  return binary_entropy(0.5 * (1.0 + r));
}

/// S(rho_diag) - S(rho), base-2 logarithm.
inline double relative_entropy_coherence(const BlochVector &p) {
  const double c = binary_entropy(0.5 * (1.0 + p.pz)) - von_neumann_entropy(p);
  return c > 0.0 ? c : 0.0;
}
inline double relative_entropy_coherence(const DensityMatrix &rho) {
  return relative_entropy_coherence(density_to_bloch(rho));
}

/// (1/2) Tr|a - b|. For qubits this is half the Euclidean distance of the Bloch vectors.
inline double trace_distance(const BlochVector &a, const BlochVector &b) { return 0.5 * (a - b).norm(); }
inline double trace_distance(const DensityMatrix &a, const DensityMatrix &b) {
  return trace_distance(density_to_bloch(a), density_to_bloch(b));
}

} // namespace noisy_tunnel
