#include "laserlock/optics.hpp"

#include "laserlock/errors.hpp"

#include <cmath>
#include <numbers>

namespace laserlock {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

cplx reflection_at(double theta, double r1, double r2) {
    const cplx e = std::polar(1.0, theta);
    return (r1 - r2 * e) / (1.0 - r1 * r2 * e);
}

// dF/dtheta
cplx reflection_derivative(double theta, double r1, double r2) {
    const cplx e = std::polar(1.0, theta);
    const cplx denom = 1.0 - r1 * r2 * e;
    return cplx(0.0, 1.0) * e * (r1 * r1 * r2 - r2) / (denom * denom);
}

double sideband_scale(const PdhConfig& pdh) {
    const double j0 = std::cyl_bessel_j(0.0, pdh.mod_depth);
    const double j1 = std::cyl_bessel_j(1.0, pdh.mod_depth);
    return 2.0 * pdh.photodetector_gain * std::abs(j0 * j1);
}

} // namespace

double CavityModel::round_trip_amplitude() const {
    // FWHM = (2 fsr / pi) asin((1 - p) / (2 sqrt(p))) with p = r1 r2; solve for x = sqrt(p).
    const double s = std::sin(0.5 * kPi * linewidth / fsr);
    const double x = std::sqrt(s * s + 1.0) - s;
    return x * x;
}

namespace {

// Intensity loss 1 - r2^2 behind the input mirror, given r1 r2 = p and
// (1 - r1^2) = coupling_ratio * (1 - r2^2).
double back_loss(double p, double c) {
    const double q = 1.0 - p * p;
    return 2.0 * q / ((1.0 + c) + std::sqrt((1.0 + c) * (1.0 + c) - 4.0 * c * q));
}

} // namespace

double CavityModel::input_reflectivity() const {
    return std::sqrt(1.0 - coupling_ratio * back_loss(round_trip_amplitude(), coupling_ratio));
}

double CavityModel::back_reflectivity() const {
    return std::sqrt(1.0 - back_loss(round_trip_amplitude(), coupling_ratio));
}

void validate(const CavityModel& cavity) {
    detail::require(std::isfinite(cavity.linewidth) && cavity.linewidth > 0.0, "cavity.linewidth_hz",
                    "must be > 0");
    detail::require(std::isfinite(cavity.fsr) && cavity.fsr > cavity.linewidth, "cavity.fsr_hz",
                    "must exceed cavity.linewidth");
    detail::require(std::isfinite(cavity.drift_rate), "cavity.drift_rate_hz_per_s", "must be finite");
    detail::require(std::isfinite(cavity.thermal_floor) && cavity.thermal_floor >= 0.0,
                    "cavity.thermal_floor", "must be >= 0");
    detail::require(std::isfinite(cavity.coupling_ratio) && cavity.coupling_ratio > 0.0,
                    "cavity.coupling_ratio", "must be > 0");
}

void validate(const PdhConfig& pdh, const CavityModel& cavity) {
    detail::require(std::isfinite(pdh.mod_freq) && pdh.mod_freq > cavity.linewidth, "pdh.mod_freq_hz",
                    "must exceed cavity.linewidth (resolved sidebands)");
    detail::require(std::isfinite(pdh.mod_depth) && pdh.mod_depth > 0.0 && pdh.mod_depth < 1.5,
                    "pdh.mod_depth_rad", "must lie in (0, 1.5)");
    detail::require(std::isfinite(pdh.photodetector_gain), "pdh.photodetector_gain_v_per_w", "must be finite");
    detail::require(std::isfinite(pdh.demod_phase), "pdh.demod_phase_rad", "must be finite");
}

Reflection cavity_reflection(double detuning, const CavityModel& cavity) {
    Reflection out;
    const double half = 0.5 * cavity.fsr;
    double d = detuning;
    if (d <= -half || d > half) {
        d = std::remainder(d, cavity.fsr);
        if (d == -half) d = half;
        out.folded = true;
    }
    out.r = reflection_at(2.0 * kPi * d / cavity.fsr, cavity.input_reflectivity(), cavity.back_reflectivity());
    return out;
}

double pdh_error(double detuning, const PdhConfig& pdh, const CavityModel& cavity) {
    const double r1 = cavity.input_reflectivity();
    const double r2 = cavity.back_reflectivity();
    const double k = 2.0 * kPi / cavity.fsr;
    const cplx f0 = reflection_at(k * detuning, r1, r2);
    const cplx fp = reflection_at(k * (detuning + pdh.mod_freq), r1, r2);
    const cplx fm = reflection_at(k * (detuning - pdh.mod_freq), r1, r2);
    const cplx chi = f0 * std::conj(fp) - std::conj(f0) * fm;
    return sideband_scale(pdh) * (chi * std::polar(1.0, -pdh.demod_phase)).imag();
}

double pdh_slope(const PdhConfig& pdh, const CavityModel& cavity) {
    const double r1 = cavity.input_reflectivity();
    const double r2 = cavity.back_reflectivity();
    const double k = 2.0 * kPi / cavity.fsr;
    const double w = k * pdh.mod_freq;
    const cplx f0 = reflection_at(0.0, r1, r2);
    const cplx fp = reflection_at(w, r1, r2);
    const cplx fm = reflection_at(-w, r1, r2);
    const cplx d0 = reflection_derivative(0.0, r1, r2);
    const cplx dp = reflection_derivative(w, r1, r2);
    const cplx dm = reflection_derivative(-w, r1, r2);
    const cplx dchi = d0 * std::conj(fp) + f0 * std::conj(dp) - std::conj(d0) * fm - std::conj(f0) * dm;
    return sideband_scale(pdh) * k * (dchi * std::polar(1.0, -pdh.demod_phase)).imag();
}

} // namespace laserlock
