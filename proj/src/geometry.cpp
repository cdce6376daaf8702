#include "liouville/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace liouville {

double geodesic_distance(Complex x, Complex y) {
  // Chord of the stereographic images on the unit sphere, then arc length.
  double chord = std::abs(x - y) / std::sqrt((1.0 + std::norm(x)) * (1.0 + std::norm(y)));
  chord = std::min(chord, 1.0);
  return 2.0 * std::asin(chord);
}

double green(Complex x, Complex y) {
  if (x == y) throw std::domain_error("green: coincident arguments");
  return -std::log(std::abs(x - y)) - std::log(std::abs(x - std::conj(y))) -
         (conformal_exponent(x) + conformal_exponent(y) + 1.0);
}

Complex green_dx(Complex x, Complex y) {
  // d/dx [-ln|x-y| - ln|x-conj y| - w0(x)] (Wirtinger).
  return -0.5 / (x - y) - 0.5 / (x - std::conj(y)) - dw0(x);
}

double diagonal_w_bulk(Complex y) {
  // G0(x,y) + log d = -ln|y - conj y| - w0(y) - 1 in the x -> y limit.
  return -std::log(2.0 * y.imag()) - conformal_exponent(y) - 1.0;
}

double diagonal_w_boundary(Complex) {
  // For real y both logs coincide and the conformal factors cancel the
  // distance asymptotics exactly, leaving the constant -1.
  return -1.0;
}

double diagonal_w(Complex y) {
  return y.imag() > 0.0 ? diagonal_w_bulk(y) : diagonal_w_boundary(y);
}

Complex half_plane_isometry(double theta, Complex x) {
  double c = std::cos(theta), s = std::sin(theta);
  Complex den = s * x + c;
  if (std::abs(den) < 1e-14) throw std::domain_error("half_plane_isometry: Mobius pole");
  Complex img = (c * x - s) / den;
  if (img.imag() < 0.0 && img.imag() > -1e-15) img = Complex(img.real(), 0.0);
  return img;
}

double Divisor::chi() const {
  double c = 1.0;
  for (const auto& p : punctures)
    c += p.kind == PunctureKind::Bulk ? p.weight : 0.5 * p.weight;
  return c;
}

double Divisor::min_pair_distance() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < punctures.size(); ++i)
    for (std::size_t j = i + 1; j < punctures.size(); ++j)
      m = std::min(m, std::abs(punctures[i].location - punctures[j].location));
  return m;
}

std::vector<std::string> Divisor::validate() const {
  std::vector<std::string> bad;
  for (std::size_t k = 0; k < punctures.size(); ++k) {
    const auto& p = punctures[k];
    if (!std::isfinite(p.location.real()) || !std::isfinite(p.location.imag()) ||
        !std::isfinite(p.weight))
      bad.push_back("puncture " + std::to_string(k) + ": non-finite data");
    if (p.weight <= -1.0)
      bad.push_back("puncture " + std::to_string(k) + ": weight " +
                    std::to_string(p.weight) + " violates w > -1");
    if (p.kind == PunctureKind::Bulk && p.location.imag() <= 0.0)
      bad.push_back("puncture " + std::to_string(k) + ": bulk point must have im > 0");
    if (p.kind == PunctureKind::Boundary && p.location.imag() != 0.0)
      bad.push_back("puncture " + std::to_string(k) + ": boundary point must have im = 0");
    for (std::size_t j = 0; j < k; ++j)
      if (punctures[j].location == p.location)
        bad.push_back("punctures " + std::to_string(j) + " and " + std::to_string(k) +
                      " coincide");
  }
  if (chi() >= 0.0)
    bad.push_back("chi(Sigma, D) = " + std::to_string(chi()) + " violates chi < 0");
  return bad;
}

std::vector<const Puncture*> Divisor::bulk() const {
  std::vector<const Puncture*> r;
  for (const auto& p : punctures)
    if (p.kind == PunctureKind::Bulk) r.push_back(&p);
  return r;
}

std::vector<const Puncture*> Divisor::boundary_sorted() const {
  std::vector<const Puncture*> r;
  for (const auto& p : punctures)
    if (p.kind == PunctureKind::Boundary) r.push_back(&p);
  std::sort(r.begin(), r.end(), [](const Puncture* a, const Puncture* b) {
    return a->location.real() < b->location.real();
  });
  return r;
}

double green_at_infinity(Complex y) {
  // G0(x,y) -> -ln 2 - w0(y) - 1 as |x| -> infinity
  return -std::log(2.0) - conformal_exponent(y) - 1.0;
}

double h_field(const Divisor& d, Complex x) {
  double h = 0;
  for (const auto& p : d.punctures) {
    if (p.half_coefficient() == 0.0) continue;  // spectators contribute nothing
    h += -2.0 * p.half_coefficient() * green(x, p.location);
  }
  return h;
}

double h_field_at_infinity(const Divisor& d) {
  double h = 0;
  for (const auto& p : d.punctures)
    h += -2.0 * p.half_coefficient() * green_at_infinity(p.location);
  return h;
}

double h_smooth(const Divisor& d, int k, Complex x) {
  const auto& pk = d.punctures[k];
  double h = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if ((int)j == k || d.punctures[j].half_coefficient() == 0.0) continue;
    h += -2.0 * d.punctures[j].half_coefficient() * green(x, d.punctures[j].location);
  }
  // own term with the log removed; for bulk z_k keep -ln|x - conj z_k| etc.
  Complex z = pk.location;
  double c2 = -2.0 * pk.half_coefficient();
  if (pk.kind == PunctureKind::Bulk) {
    // -2a [ -ln|x-z| - ln|x-conj z| - w0(x) - w0(z) - 1 ] - 2a ln|x-z|
    h += c2 * (-std::log(std::abs(x - std::conj(z))) -
               (conformal_exponent(x) + conformal_exponent(z) + 1.0));
  } else {
    // -b [ -2 ln|x-s| - w0(x) - w0(s) - 1 ] - 2b ln|x-s|
    h += c2 * (-(conformal_exponent(x) + conformal_exponent(z) + 1.0));
  }
  return h;
}

Complex dh_field(const Divisor& d, Complex x) {
  Complex g{0, 0};
  for (const auto& p : d.punctures) {
    if (p.half_coefficient() == 0.0) continue;
    g += -2.0 * p.half_coefficient() * green_dx(x, p.location);
  }
  return g;
}

Complex dh_smooth(const Divisor& d, int k, Complex x) {
  const auto& pk = d.punctures[k];
  Complex g{0, 0};
  for (std::size_t j = 0; j < d.size(); ++j) {
    if ((int)j == k || d.punctures[j].half_coefficient() == 0.0) continue;
    g += -2.0 * d.punctures[j].half_coefficient() * green_dx(x, d.punctures[j].location);
  }
  Complex z = pk.location;
  double c2 = -2.0 * pk.half_coefficient();
  if (pk.kind == PunctureKind::Bulk)
    g += c2 * (-0.5 / (x - std::conj(z)) - dw0(x));
  else
    g += c2 * (-dw0(x));
  return g;
}

Complex green_dxx(Complex x, Complex y) {
  return 0.5 / ((x - y) * (x - y)) + 0.5 / ((x - std::conj(y)) * (x - std::conj(y))) - d2w0(x);
}

Complex d2h_smooth(const Divisor& d, int k, Complex x) {
  const auto& pk = d.punctures[k];
  Complex g{0, 0};
  for (std::size_t j = 0; j < d.size(); ++j) {
    if ((int)j == k || d.punctures[j].half_coefficient() == 0.0) continue;
    g += -2.0 * d.punctures[j].half_coefficient() * green_dxx(x, d.punctures[j].location);
  }
  Complex z = pk.location;
  double c2 = -2.0 * pk.half_coefficient();
  if (pk.kind == PunctureKind::Bulk)
    g += c2 * (0.5 / ((x - std::conj(z)) * (x - std::conj(z))) - d2w0(x));
  else
    g += c2 * (-d2w0(x));
  return g;
}

std::vector<DoubledEntry> doubled_list(const Divisor& d) {
  std::vector<DoubledEntry> out;
  for (std::size_t k = 0; k < d.punctures.size(); ++k) {
    const auto& p = d.punctures[k];
    if (p.kind == PunctureKind::Bulk)
      out.push_back({p.location, p.weight, static_cast<int>(k), false, false});
  }
  for (std::size_t k = 0; k < d.punctures.size(); ++k) {
    const auto& p = d.punctures[k];
    if (p.kind == PunctureKind::Bulk)
      out.push_back({std::conj(p.location), p.weight, static_cast<int>(k), true, false});
  }
  for (std::size_t k = 0; k < d.punctures.size(); ++k) {
    const auto& p = d.punctures[k];
    if (p.kind == PunctureKind::Boundary)
      out.push_back({p.location, p.weight, static_cast<int>(k), false, true});
  }
  return out;
}

}  // namespace liouville
