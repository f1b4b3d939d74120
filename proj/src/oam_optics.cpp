#include "oamtomo/oam_optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace oamtomo {

namespace {

constexpr double kPi = std::numbers::pi;

// Nodes and weights of a composite Simpson rule with n subintervals.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Rule1D simpson_rule(double a, double b, int n) {
  Rule1D rule;
  const auto m = static_cast<std::size_t>(n);
  rule.nodes.resize(m + 1);
  rule.weights.resize(m + 1);
  const double h = (b - a) / n;
  for (std::size_t k = 0; k <= m; ++k) {
    rule.nodes[k] = a + h * static_cast<double>(k);
    const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    rule.weights[k] = w * h / 3.0;
  }
  return rule;
}

int even_at_least(int n, int floor_val) {
  int v = std::max(n, floor_val);
  if (v % 2 == 1) ++v;
  return v;
}

double quantize(double x, double pixel) {
  return (std::floor(x / pixel) + 0.5) * pixel;
}

// One vertical strip of a split-domain integration: constant mask
// transmission over [x_lo, x_hi].
struct Strip {
  double x_lo = 0.0;
  double x_hi = 0.0;
  C64 transmission{1.0, 0.0};
};

C64 integrate_product(const Field& field, const LGModeSpec& target,
                      const Rule1D& x_rule, const Rule1D& y_rule) {
  C64 total{0.0, 0.0};
  for (std::size_t jy = 0; jy < y_rule.nodes.size(); ++jy) {
    const double y = y_rule.nodes[jy];
    C64 row{0.0, 0.0};
    for (std::size_t ix = 0; ix < x_rule.nodes.size(); ++ix) {
      const double x = x_rule.nodes[ix];
      row += x_rule.weights[ix] * field(x, y) * std::conj(lg_amplitude(target, x, y));
    }
    total += y_rule.weights[jy] * row;
  }
  return total;
}

}  // namespace

void LGModeSpec::validate() const {
  if (p < 0 || p > 32) {
    throw std::invalid_argument("LGModeSpec: radial index out of range");
  }
  if (m < -32 || m > 32) {
    throw std::invalid_argument("LGModeSpec: azimuthal index out of range");
  }
  if (!(w0 > 0.0) || !std::isfinite(w0)) {
    throw std::invalid_argument("LGModeSpec: waist must be positive");
  }
}

C64 lg_amplitude(const LGModeSpec& mode, double x, double y) {
  const int m_abs = std::abs(mode.m);
  const double norm =
      std::sqrt(2.0 / kPi *
                std::exp(std::lgamma(mode.p + 1.0) - std::lgamma(mode.p + m_abs + 1.0))) /
      mode.w0;
  const double r2 = x * x + y * y;
  const double arg = 2.0 * r2 / (mode.w0 * mode.w0);
  double radial = norm * std::exp(-r2 / (mode.w0 * mode.w0)) *
                  std::assoc_laguerre(static_cast<unsigned>(mode.p),
                                      static_cast<unsigned>(m_abs), arg);
  if (m_abs > 0) {
    radial *= std::pow(std::sqrt(arg), m_abs);
    if (radial == 0.0) return C64{0.0, 0.0};
    return radial * std::polar(1.0, mode.m * std::atan2(y, x));
  }
  return C64{radial, 0.0};
}

Field lg_field(const LGModeSpec& mode) {
  mode.validate();
  return [mode](double x, double y) { return lg_amplitude(mode, x, y); };
}

void PhaseMask::validate() const {
  if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(phase)) {
    throw std::invalid_argument("PhaseMask: parameters must be finite");
  }
  if (!(pixel_size >= 0.0) || !std::isfinite(pixel_size)) {
    throw std::invalid_argument("PhaseMask: pixel size must be nonnegative");
  }
  if (charge < -16 || charge > 16) {
    throw std::invalid_argument("PhaseMask: vortex charge out of range");
  }
}

C64 mask_transmission(const PhaseMask& mask, double x, double y) {
  double xe = x;
  double ye = y;
  if (mask.pixel_size > 0.0) {
    xe = quantize(x, mask.pixel_size);
    ye = quantize(y, mask.pixel_size);
  }
  switch (mask.kind) {
    case PhaseMask::Kind::vortex: {
      const double dx = xe - mask.x0;
      const double dy = ye - mask.y0;
      if (dx == 0.0 && dy == 0.0) return C64{1.0, 0.0};
      return std::polar(1.0, mask.charge * std::atan2(dy, dx));
    }
    case PhaseMask::Kind::step: {
      const double d = xe - mask.x0;
      const double sg = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      return std::polar(1.0, 0.5 * mask.phase * sg);
    }
    case PhaseMask::Kind::uniform:
      return std::polar(1.0, mask.phase);
  }
  throw std::logic_error("mask_transmission: unknown mask kind");
}

Field apply_mask(Field field, const PhaseMask& mask) {
  mask.validate();
  return [field = std::move(field), mask](double x, double y) {
    return field(x, y) * mask_transmission(mask, x, y);
  };
}

PhaseMask vortex_mask(int charge, double x0, double y0) {
  PhaseMask m;
  m.kind = PhaseMask::Kind::vortex;
  m.charge = charge;
  m.x0 = x0;
  m.y0 = y0;
  return m;
}

PhaseMask step_mask(double x0, double phase_jump) {
  PhaseMask m;
  m.kind = PhaseMask::Kind::step;
  m.x0 = x0;
  m.phase = phase_jump;
  return m;
}

void QuadratureGrid::validate() const {
  if (!(half_extent >= 6.0) || !std::isfinite(half_extent)) {
    throw std::invalid_argument(
        "QuadratureGrid: half extent must be at least 6 waists");
  }
  if (samples_per_axis < 16 || samples_per_axis > 16384) {
    throw std::invalid_argument("QuadratureGrid: samples per axis out of range");
  }
  if (samples_per_axis % 2 != 0) {
    throw std::invalid_argument("QuadratureGrid: samples per axis must be even");
  }
}

C64 mode_overlap(const Field& field, const LGModeSpec& target,
                 const QuadratureGrid& grid) {
  grid.validate();
  target.validate();
  if (!field) throw std::invalid_argument("mode_overlap: empty field");
  const double half = grid.half_extent * target.w0;
  const Rule1D rule = simpson_rule(-half, half, grid.samples_per_axis);
  return integrate_product(field, target, rule, rule);
}

double gaussian_component(const Field& field, double filter_w0,
                          const QuadratureGrid& grid) {
  return std::norm(mode_overlap(field, LGModeSpec{0, 0, filter_w0}, grid));
}

C64 masked_overlap(const Field& base, const PhaseMask& mask,
                   const LGModeSpec& target, const QuadratureGrid& grid) {
  grid.validate();
  target.validate();
  mask.validate();
  if (!base) throw std::invalid_argument("masked_overlap: empty field");

  if (mask.kind != PhaseMask::Kind::step) {
    return mode_overlap(apply_mask(base, mask), target, grid);
  }
  if (mask.pixel_size > 0.0) {
    throw std::invalid_argument(
        "masked_overlap: pixelated step masks are not supported by the split integrator");
  }

  // The step transmission is piecewise constant in x, so integrate each
  // side of the jump with its own rule; a composite rule straddling the
  // discontinuity would lose several digits.
  const double half = grid.half_extent * target.w0;
  const double h = 2.0 * half / grid.samples_per_axis;
  const C64 t_minus = std::polar(1.0, -0.5 * mask.phase);
  const C64 t_plus = std::polar(1.0, 0.5 * mask.phase);

  std::vector<Strip> strips;
  if (mask.x0 <= -half) {
    strips.push_back(Strip{-half, half, t_plus});
  } else if (mask.x0 >= half) {
    strips.push_back(Strip{-half, half, t_minus});
  } else {
    strips.push_back(Strip{-half, mask.x0, t_minus});
    strips.push_back(Strip{mask.x0, half, t_plus});
  }

  const Rule1D y_rule = simpson_rule(-half, half, grid.samples_per_axis);
  C64 total{0.0, 0.0};
  for (const Strip& strip : strips) {
    const double width = strip.x_hi - strip.x_lo;
    if (width <= 0.0) continue;
    const int n_sub = even_at_least(static_cast<int>(std::ceil(width / h)), 2);
    const Rule1D x_rule = simpson_rule(strip.x_lo, strip.x_hi, n_sub);
    total += strip.transmission * integrate_product(base, target, x_rule, y_rule);
  }
  return total;
}

double masked_gaussian_component(const Field& base, const PhaseMask& mask,
                                 double filter_w0, const QuadratureGrid& grid) {
  return std::norm(masked_overlap(base, mask, LGModeSpec{0, 0, filter_w0}, grid));
}

double field_power(const Field& field, double ref_w0, const QuadratureGrid& grid) {
  grid.validate();
  if (!field) throw std::invalid_argument("field_power: empty field");
  if (!(ref_w0 > 0.0)) {
    throw std::invalid_argument("field_power: reference waist must be positive");
  }
  const double half = grid.half_extent * ref_w0;
  const Rule1D rule = simpson_rule(-half, half, grid.samples_per_axis);
  double total = 0.0;
  for (std::size_t jy = 0; jy < rule.nodes.size(); ++jy) {
    double row = 0.0;
    for (std::size_t ix = 0; ix < rule.nodes.size(); ++ix) {
      row += rule.weights[ix] * std::norm(field(rule.nodes[ix], rule.nodes[jy]));
    }
    total += rule.weights[jy] * row;
  }
  return total;
}

std::vector<ScanPoint> vortex_scan(double w0, VortexPath path,
                                   const std::vector<double>& s_values,
                                   const QuadratureGrid& grid) {
  if (!(w0 > 0.0) || !std::isfinite(w0)) {
    throw std::invalid_argument("vortex_scan: waist must be positive");
  }
  const Field base = lg_field(LGModeSpec{0, 0, w0});
  std::vector<ScanPoint> out;
  out.reserve(s_values.size());
  for (const double s : s_values) {
    const double d = s * w0;
    const double x0 = (path == VortexPath::diagonal) ? d / std::numbers::sqrt2 : d;
    const double y0 = (path == VortexPath::diagonal) ? d / std::numbers::sqrt2 : 0.0;
    const PhaseMask mask = vortex_mask(1, x0, y0);
    out.push_back(ScanPoint{s, masked_gaussian_component(base, mask, w0, grid)});
  }
  return out;
}

std::vector<ScanPoint> step_scan(double w0, const std::vector<double>& s_values,
                                 const QuadratureGrid& grid) {
  if (!(w0 > 0.0) || !std::isfinite(w0)) {
    throw std::invalid_argument("step_scan: waist must be positive");
  }
  const Field base = lg_field(LGModeSpec{0, 0, w0});
  std::vector<ScanPoint> out;
  out.reserve(s_values.size());
  for (const double s : s_values) {
    const PhaseMask mask = step_mask(s * w0, kPi);
    out.push_back(ScanPoint{s, masked_gaussian_component(base, mask, w0, grid)});
  }
  return out;
}

double step_gaussian_component_exact(double s) {
  const double t = std::erf(std::numbers::sqrt2 * s);
  return t * t;
}

double conversion_efficiency(const LGModeSpec& source, const PhaseMask& mask,
                             double filter_w0, const QuadratureGrid& grid) {
  source.validate();
  return std::norm(
      masked_overlap(lg_field(source), mask, LGModeSpec{0, 0, filter_w0}, grid));
}

double grating_efficiency_scale(double component, double efficiency) {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("grating_efficiency_scale: efficiency must be in (0, 1]");
  }
  if (!(component >= 0.0)) {
    throw std::invalid_argument("grating_efficiency_scale: component must be nonnegative");
  }
  return component * efficiency;
}

std::vector<ScanPoint> normalize_peak(std::vector<ScanPoint> scan) {
  double peak = 0.0;
  for (const ScanPoint& pt : scan) peak = std::max(peak, pt.gaussian_component);
  if (peak <= 0.0) return scan;
  for (ScanPoint& pt : scan) pt.gaussian_component /= peak;
  return scan;
}

}  // namespace oamtomo
