#pragma once

#include <complex>

namespace laserlock {

/// Fabry-Perot reference cavity.
struct CavityModel {
    double fsr = 1.5e9;            ///< free spectral range, Hz
    double linewidth = 1.0e4;      ///< resonance FWHM, Hz
    double drift_rate = 0.0;       ///< Hz/s
    double thermal_floor = 0.0;    ///< fractional-frequency Allan floor
    double coupling_ratio = 1.0;   ///< input transmission / internal loss; 1 is impedance matched

    /// Finesse-equivalent round-trip amplitude factor r_in * r_back.
    double round_trip_amplitude() const;
    double input_reflectivity() const;
    double back_reflectivity() const;

    bool operator==(const CavityModel&) const = default;
};

void validate(const CavityModel& cavity);

/// Pound-Drever-Hall modulation and demodulation parameters.
struct PdhConfig {
    double mod_freq = 20.0e6;          ///< Hz
    double mod_depth = 1.08;           ///< rad
    double photodetector_gain = 1.0;   ///< V/W, with 1 W incident
    double demod_phase = 0.0;          ///< rad

    bool operator==(const PdhConfig&) const = default;
};

void validate(const PdhConfig& pdh, const CavityModel& cavity);

struct Reflection {
    std::complex<double> r;
    bool folded = false;   ///< detuning was outside (-fsr/2, fsr/2] and was wrapped
};

/// Amplitude reflection coefficient of a two-mirror cavity,
/// r = (r1 - r2 e^{i theta}) / (1 - r1 r2 e^{i theta}), theta = 2 pi detuning / fsr.
/// Mirror amplitudes follow from the linewidth and coupling ratio; the
/// default (coupling 1) is lossless and impedance matched, so r(0) = 0.
Reflection cavity_reflection(double detuning, const CavityModel& cavity);

/// Error signal (V) for a laser detuned from resonance. With first-order
/// sidebands at +-mod_freq,
///   chi = F(d) F*(d + W) - F*(d) F(d - W)
///   error = 2 G sqrt(Pc Ps) Im[chi e^{-i demod_phase}]
/// with Pc = J0(beta)^2, Ps = J1(beta)^2 and G the photodetector gain.
/// Odd in detuning. For critically coupled defaults and demod_phase = 0 the
/// slope at resonance is negative, -8 G sqrt(Pc Ps) / linewidth.
double pdh_error(double detuning, const PdhConfig& pdh, const CavityModel& cavity);

/// d(pdh_error)/d(detuning) at zero detuning, in V/Hz, evaluated analytically.
double pdh_slope(const PdhConfig& pdh, const CavityModel& cavity);

} // namespace laserlock
