#pragma once

#include <functional>
#include <vector>

#include "oamtomo/qutrit.hpp"

namespace oamtomo {

// Laguerre-Gaussian mode at its waist plane: radial index p >= 0,
// azimuthal index m, waist radius w0 > 0.
struct LGModeSpec {
  int p = 0;
  int m = 0;
  double w0 = 1.0;

  void validate() const;
};

// Transverse field amplitude as a function of (x, y).
using Field = std::function<C64(double, double)>;

// Normalized waist-plane amplitude
//   E(r, phi) = N (sqrt(2) r / w0)^|m| L_p^|m|(2 r^2 / w0^2)
//               exp(-r^2 / w0^2) exp(i m phi),
//   N = sqrt(2 p! / (pi (p + |m|)!)) / w0,
// so that the total power integrates to one.
C64 lg_amplitude(const LGModeSpec& mode, double x, double y);
Field lg_field(const LGModeSpec& mode);

// Idealized phase-only transmission of a spatial light modulator.
//  - vortex: T = exp(i charge atan2(y - y0, x - x0)); exactly at the
//    core the phase is taken as zero, so T(x0, y0) = 1.
//  - step: phase jump of `phase` across the vertical line x = x0,
//    T = exp(i (phase/2) sgn(x - x0)); on the line sgn is zero and
//    T = 1.
//  - uniform: T = exp(i phase) everywhere.
// pixel_size > 0 quantizes coordinates to pixel centers before the
// phase is evaluated; zero means a continuous mask.
struct PhaseMask {
  enum class Kind { vortex, step, uniform };

  Kind kind = Kind::uniform;
  double x0 = 0.0;
  double y0 = 0.0;
  double phase = 0.0;
  int charge = 1;
  double pixel_size = 0.0;

  void validate() const;
};

C64 mask_transmission(const PhaseMask& mask, double x, double y);
Field apply_mask(Field field, const PhaseMask& mask);

// Convenience factories for the two masks that matter here.
PhaseMask vortex_mask(int charge, double x0 = 0.0, double y0 = 0.0);
PhaseMask step_mask(double x0, double phase_jump);

// Tensor-product 2-D composite Simpson rule on the square
// [-L, L]^2 with L = half_extent * (reference waist). samples_per_axis
// counts subintervals per axis and must be even; half_extent is
// enforced >= 6 so the Gaussian tails are negligible at double
// precision.
struct QuadratureGrid {
  double half_extent = 8.0;
  int samples_per_axis = 1024;

  void validate() const;
};

// integral of field * conj(target mode) over the grid sized by the
// target's waist.
C64 mode_overlap(const Field& field, const LGModeSpec& target,
                 const QuadratureGrid& grid = {});

// |overlap with the fundamental Gaussian of waist filter_w0|^2: the
// fraction of power a single-mode fiber behind a perfect mode filter
// would accept.
double gaussian_component(const Field& field, double filter_w0,
                          const QuadratureGrid& grid = {});

// Overlap of (mask applied to base) with the target mode. For step
// masks the x integration is split at the phase discontinuity and each
// side is integrated with its own Simpson rule, since a composite rule
// straddling the jump loses several digits. Other mask kinds are
// evaluated pointwise.
C64 masked_overlap(const Field& base, const PhaseMask& mask,
                   const LGModeSpec& target, const QuadratureGrid& grid = {});

double masked_gaussian_component(const Field& base, const PhaseMask& mask,
                                 double filter_w0,
                                 const QuadratureGrid& grid = {});

// integral of |field|^2 over the grid sized by ref_w0.
double field_power(const Field& field, double ref_w0,
                   const QuadratureGrid& grid = {});

struct ScanPoint {
  double s = 0.0;
  double gaussian_component = 0.0;
};

// Direction along which a vortex core is displaced from the beam axis.
enum class VortexPath { diagonal, axis };

// Gaussian component of a fundamental Gaussian (waist w0) sent through
// a unit-charge vortex mask whose core sits at distance s * w0 from
// the beam axis along the given path. The s = 0 point converts the
// beam entirely out of the fundamental mode.
std::vector<ScanPoint> vortex_scan(double w0, VortexPath path,
                                   const std::vector<double>& s_values,
                                   const QuadratureGrid& grid = {});

// Gaussian component of a fundamental Gaussian behind a pi step mask
// whose edge sits at x = s * w0.
std::vector<ScanPoint> step_scan(double w0, const std::vector<double>& s_values,
                                 const QuadratureGrid& grid = {});

// Closed form for the step scan: erf(sqrt(2) s)^2 with s the edge
// offset in waist units.
double step_gaussian_component_exact(double s);

// |overlap|^2 of a source mode behind a mask with the fundamental
// Gaussian of waist filter_w0.
double conversion_efficiency(const LGModeSpec& source, const PhaseMask& mask,
                             double filter_w0, const QuadratureGrid& grid = {});

// Scales a mode-conversion component by the first-order diffraction
// efficiency of the grating that carries the phase pattern.
double grating_efficiency_scale(double component, double efficiency = 0.25);

// Rescales a scan so its largest component is 1. A scan whose peak is
// zero is returned unchanged.
std::vector<ScanPoint> normalize_peak(std::vector<ScanPoint> scan);

}  // namespace oamtomo
