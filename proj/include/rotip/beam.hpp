#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rotip/errors.hpp"

namespace rotip {

// Width of the clamped sheet strip as a function of distance x from the
// squeeze line. Constant covers centre/edge squeezes; CornerLinear covers a
// corner squeeze where the strip widens linearly from the tip until the
// sheet width caps it.
struct WidthProfile {
  enum class Kind { Constant, CornerLinear };
  Kind kind = Kind::Constant;
  double w0 = 210.0;    // Constant width (mm)
  double slope = 2.0;   // CornerLinear growth dw/dx
  double cap = 210.0;   // CornerLinear truncation at the sheet width (mm)

  static WidthProfile constant(double w) {
    return WidthProfile{Kind::Constant, w, 0.0, w};
  }
  static WidthProfile corner_linear(double slope, double cap) {
    return WidthProfile{Kind::CornerLinear, 0.0, slope, cap};
  }

  double width(double x) const {
    if (kind == Kind::Constant) return w0;
    return std::min(slope * x, cap);
  }
};

struct BeamSpec {
  double E = 828.0;      // elastic modulus (MPa)
  double h = 0.1;        // sheet thickness (mm)
  double l = 20.0;       // free span between the fingers (mm)
  WidthProfile width = WidthProfile::constant(210.0);
  double mu_s1 = 0.5;    // static friction, finger side
  double mu_k2 = 0.1;    // kinetic friction, sheet side
  double m1 = 0.1;       // squeezed-sheet mass share (kg)
  double m2 = 0.005;     // single following sheet (kg)
  double r = 8.0;        // finger radius (mm)
  double g = 9.81;

  void validate() const {
    if (E <= 0.0 || h <= 0.0 || l <= 0.0 || r <= 0.0)
      throw PreconditionViolation("BeamSpec: E, h, l, r must be > 0");
    if (m1 < 0.0 || m2 < 0.0)
      throw PreconditionViolation("BeamSpec: masses must be >= 0");
    if (width.kind == WidthProfile::Kind::Constant && width.w0 <= 0.0)
      throw PreconditionViolation("BeamSpec: constant width must be > 0");
    if (width.kind == WidthProfile::Kind::CornerLinear &&
        (width.slope <= 0.0 || width.cap <= 0.0))
      throw PreconditionViolation("BeamSpec: corner profile must grow");
  }
};

// Arched deflection shape shared across squeeze locations: the raised cosine
// v(x) = delta (1 - cos 2 pi x / l) / 2, which is zero and flat at both
// clamps and peaks at delta mid-span. delta = 0 describes the flat sheet.
struct DeflectionCurve {
  double delta = 1.0;  // apex deflection (mm)
  double l = 20.0;     // span (mm)

  static DeflectionCurve raised_cosine(double delta, double l) {
    if (delta < 0.0 || l <= 0.0)
      throw PreconditionViolation("DeflectionCurve: delta >= 0 and l > 0");
    return DeflectionCurve{delta, l};
  }
  static DeflectionCurve flat(double l) { return raised_cosine(0.0, l); }

  double v(double x) const {
    return 0.5 * delta * (1.0 - std::cos(2.0 * M_PI * x / l));
  }
  double vp(double x) const {
    return delta * M_PI / l * std::sin(2.0 * M_PI * x / l);
  }
  double vpp(double x) const {
    return 2.0 * delta * M_PI * M_PI / (l * l) * std::cos(2.0 * M_PI * x / l);
  }
  double apex() const { return 0.5 * l; }
};

// I_z = integral of w(x) h^3 / 12 over the span; the h^3/12 strip inertia is
// integrated along x per the sheet-bending convention, so the unit is mm^5.
inline double inertia_moment(const BeamSpec& spec) {
  spec.validate();
  double area;  // integral of w(x) dx
  if (spec.width.kind == WidthProfile::Kind::Constant) {
    area = spec.width.w0 * spec.l;
  } else {
    double xc = spec.width.cap / spec.width.slope;
    if (xc >= spec.l)
      area = 0.5 * spec.width.slope * spec.l * spec.l;
    else
      area = 0.5 * spec.width.slope * xc * xc + spec.width.cap * (spec.l - xc);
  }
  return area * spec.h * spec.h * spec.h / 12.0;
}

namespace detail {

inline double small_deflection_moment(const DeflectionCurve& c, double E,
                                      double iz, double x) {
  return std::abs(E * iz * c.vpp(x));
}

// Elastica bending moment E I dk/ds with k the tangent slope angle, taken by
// central differences of the slope and the arc length with step refinement.
inline double large_deflection_moment(const DeflectionCurve& c, double E,
                                      double iz, double x) {
  auto slope_angle = [&](double t) { return std::atan(c.vp(t)); };
  auto arc_between = [&](double a, double b) {
    // Simpson on the analytic integrand sqrt(1 + v'^2)
    auto f = [&](double t) {
      double d = c.vp(t);
      return std::sqrt(1.0 + d * d);
    };
    double mid = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
  };

  double h = c.l / 50.0;
  double prev = 0.0;
  bool have_prev = false;
  const double h_floor = 1e-7 * c.l;
  while (true) {
    double a = x - h;
    double b = x + h;
    double dk = slope_angle(b) - slope_angle(a);
    double ds = arc_between(a, b);
    double val = dk / ds;
    if (have_prev && std::abs(val - prev) <= 1e-6 * std::abs(val)) {
      prev = val;
      break;
    }
    prev = val;
    have_prev = true;
    h *= 0.5;
    if (h < h_floor) break;
  }
  if (std::abs(prev) < 1e-12)
    throw SingularSlope(
        "bending_moment: slope derivative vanishes at the evaluation point");
  return std::abs(E * iz * prev);
}

}  // namespace detail

// Bending moment at x. Small-deflection curves (delta <= l/10) use the
// linearized E I v''; larger arches use the numeric elastica branch.
inline double bending_moment(const DeflectionCurve& curve, double E, double iz,
                             double x) {
  if (x < 0.0 || x > curve.l)
    throw PreconditionViolation("bending_moment: x outside [0, l]");
  if (curve.delta == 0.0) return 0.0;
  if (curve.delta <= curve.l / 10.0)
    return detail::small_deflection_moment(curve, E, iz, x);
  return detail::large_deflection_moment(curve, E, iz, x);
}

struct SqueezeResult {
  double f_min = 0.0;        // minimal squeeze force (N)
  double m1_moment = 0.0;    // bending moment at the apex
  double iz = 0.0;
  double torque_limit = 0.0; // no-slip bound on the drive torque, r mu_s1 (m1 g + F)
};

// Smallest squeeze force F >= 0 for which finger-side static friction can
// both drag the sheet against the sheet-side kinetic friction and supply the
// arching moment: mu_s1 (m1 g + F) >= mu_k2 (m1 + m2) g + mu_k2 F + M1/v.
inline SqueezeResult min_squeeze_force(const BeamSpec& spec,
                                       const DeflectionCurve& curve) {
  spec.validate();
  if (spec.mu_s1 <= spec.mu_k2)
    throw Infeasible(
        "min_squeeze_force: requires mu_s1 > mu_k2, no force suffices");
  double v_apex = curve.v(curve.apex());
  if (v_apex <= 0.0)
    throw PreconditionViolation("min_squeeze_force: apex deflection must be > 0");

  SqueezeResult out;
  out.iz = inertia_moment(spec);
  out.m1_moment = bending_moment(curve, spec.E, out.iz, curve.apex());
  double numer = spec.mu_k2 * (spec.m1 + spec.m2) * spec.g -
                 spec.mu_s1 * spec.m1 * spec.g + out.m1_moment / v_apex;
  out.f_min = std::max(0.0, numer / (spec.mu_s1 - spec.mu_k2));
  out.torque_limit = spec.r * spec.mu_s1 * (spec.m1 * spec.g + out.f_min);
  return out;
}

struct LocationRow {
  std::string label;
  double f_min = 0.0;
  double iz = 0.0;
  double m1_moment = 0.0;
  bool feasible = true;
  double torque_limit = 0.0;
};

struct LocationReport {
  std::vector<LocationRow> rows;
  std::string verdict;          // "strict" | "tie" | "unordered" | "infeasible"
  double ratio_first_last = 0.0;
};

// F_min per squeeze location, with a verdict on whether the forces strictly
// decrease in the listed order. Infeasible rows are reported, not thrown.
inline LocationReport location_report(
    std::span<const std::pair<std::string, BeamSpec>> specs,
    const DeflectionCurve& curve) {
  if (specs.size() < 2)
    throw PreconditionViolation("location_report: need at least 2 locations");
  LocationReport rep;
  bool any_infeasible = false;
  for (const auto& [label, spec] : specs) {
    LocationRow row;
    row.label = label;
    try {
      SqueezeResult r = min_squeeze_force(spec, curve);
      row.f_min = r.f_min;
      row.iz = r.iz;
      row.m1_moment = r.m1_moment;
      row.torque_limit = r.torque_limit;
    } catch (const Infeasible&) {
      row.feasible = false;
      row.f_min = std::numeric_limits<double>::quiet_NaN();
      any_infeasible = true;
    }
    rep.rows.push_back(std::move(row));
  }
  if (any_infeasible) {
    rep.verdict = "infeasible";
    return rep;
  }
  bool strict = true;
  bool tie = false;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.rows[i].f_min == rep.rows[i - 1].f_min) tie = true;
    if (rep.rows[i].f_min > rep.rows[i - 1].f_min) strict = false;
  }
  rep.verdict = strict ? (tie ? "tie" : "strict") : "unordered";
  if (rep.rows.back().f_min > 0.0)
    rep.ratio_first_last = rep.rows.front().f_min / rep.rows.back().f_min;
  return rep;
}

// The four squeeze locations of an A4 sheet (210 x 297 mm) used in the force
// comparison: centre and edge clamp constant-width strips; the corner cases
// clamp triangular flaps. Case 2 squeezes along the corner bisector, where
// the flap widens at dw/dx = 2 tan(45 deg); case 1 squeezes askew of the
// bisector (22.5 deg construction), widening at tan(67.5 deg).
inline std::vector<std::pair<std::string, BeamSpec>> a4_location_specs(
    const BeamSpec& base) {
  const double long_side = 297.0;
  const double short_side = 210.0;
  std::vector<std::pair<std::string, BeamSpec>> out;
  BeamSpec s = base;
  s.width = WidthProfile::constant(long_side);
  out.emplace_back("center", s);
  s.width = WidthProfile::constant(short_side);
  out.emplace_back("edge", s);
  s.width = WidthProfile::corner_linear(std::tan(67.5 * M_PI / 180.0),
                                        short_side);
  out.emplace_back("corner_case1", s);
  s.width = WidthProfile::corner_linear(2.0, short_side);
  out.emplace_back("corner_case2", s);
  return out;
}

}  // namespace rotip
