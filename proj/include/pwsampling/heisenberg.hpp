#pragma once

// Arithmetic on the Heisenberg group H_m = R x C^m.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"

namespace pws {

struct GroupPoint {
  double t = 0.0;
  std::vector<std::complex<double>> z;

  GroupPoint() = default;
  GroupPoint(double t_, std::vector<std::complex<double>> z_) : t(t_), z(std::move(z_)) {}

  static GroupPoint identity(std::size_t m) { return GroupPoint(0.0, std::vector<std::complex<double>>(m)); }

  std::size_t m() const { return z.size(); }
};

/// Symplectic form sum_k Im(z_k * conj(w_k)). Used as the cocycle of the
/// group law; with this form (-t, -z) is the inverse of (t, z).
inline double symplectic_form(const std::vector<std::complex<double>>& z,
                              const std::vector<std::complex<double>>& w) {
  if (z.size() != w.size()) {
    throw DimensionError("symplectic_form: m mismatch (" + std::to_string(z.size()) + " vs " +
                         std::to_string(w.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) s += std::imag(z[k] * std::conj(w[k]));
  return s;
}

/// (t, z)(t', z') = (t + t' + 2 w(z, z'), z + z').
inline GroupPoint heisenberg_compose(const GroupPoint& g, const GroupPoint& h) {
  if (g.m() != h.m()) {
    throw DimensionError("heisenberg_compose: m mismatch (" + std::to_string(g.m()) + " vs " +
                         std::to_string(h.m()) + ")");
  }
  GroupPoint out;
  out.t = g.t + h.t + 2.0 * symplectic_form(g.z, h.z);
  out.z.resize(g.m());
  for (std::size_t k = 0; k < g.m(); ++k) out.z[k] = g.z[k] + h.z[k];
  return out;
}

inline GroupPoint heisenberg_inverse(const GroupPoint& g) {
  GroupPoint out;
  out.t = -g.t;
  out.z.resize(g.m());
  for (std::size_t k = 0; k < g.m(); ++k) out.z[k] = -g.z[k];
  return out;
}

/// delta_s(t, z) = (s^2 t, s z).
inline GroupPoint dilate(double s, const GroupPoint& g) {
  if (!(s > 0.0)) throw DomainError("dilate: scale must be positive, got " + std::to_string(s));
  GroupPoint out;
  out.t = s * s * g.t;
  out.z.resize(g.m());
  for (std::size_t k = 0; k < g.m(); ++k) out.z[k] = s * g.z[k];
  return out;
}

/// (t^2 + |z|^4)^{1/4}, homogeneous of degree one under dilate.
inline double homogeneous_norm(const GroupPoint& g) {
  double z2 = 0.0;
  for (const auto& c : g.z) z2 += std::norm(c);
  return std::pow(g.t * g.t + z2 * z2, 0.25);
}

/// Homogeneous dimension Q = 2m + 2.
inline int homogeneous_dimension(std::size_t m) { return 2 * static_cast<int>(m) + 2; }

}  // namespace pws
