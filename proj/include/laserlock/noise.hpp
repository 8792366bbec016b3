#pragma once

#include "laserlock/trace.hpp"

#include <array>
#include <cstdint>

namespace laserlock {

/// Free-running oscillator described by a one-sided power-law frequency-noise
/// PSD, S_nu(f) = sum_alpha h_alpha f^alpha in Hz^2/Hz, plus a linear drift.
///
/// The phase-noise PSD follows as S_phi(f) = S_nu(f) / f^2. Below f_low the
/// model is held at its f_low value; above f_high it is zero.
struct NoiseSpec {
    static constexpr int kMinExponent = -2;
    static constexpr int kMaxExponent = 2;

    std::array<double, 5> h{};  ///< h[alpha + 2]
    double drift_rate = 0.0;    ///< Hz/s
    double f_low = 1.0;         ///< Hz
    double f_high = 1.0e6;      ///< Hz

    double coefficient(int alpha) const { return h.at(static_cast<std::size_t>(alpha + 2)); }
    void set_coefficient(int alpha, double value) { h.at(static_cast<std::size_t>(alpha + 2)) = value; }

    static NoiseSpec white_fm(double h0, double f_low, double f_high);

    bool operator==(const NoiseSpec&) const = default;
};

/// Throws ValidationError naming the violated field.
void validate(const NoiseSpec& spec);

/// Model frequency-noise PSD (Hz^2/Hz) at f, including the low clamp and high cap.
double frequency_psd(const NoiseSpec& spec, double f);

/// Frequency-domain synthesis of the free-running phase.
///
/// A zero-mean frequency-noise sequence is shaped in the frequency domain on a
/// grid of twice the trace length (power of two), truncated, and integrated
/// sample by sample: phi[0] = 0, phi[n+1] = phi[n] + 2 pi nu[n] / fs. The
/// drift term pi * drift_rate * t^2 is added afterwards. The trace holds
/// round(duration * fs) + 1 samples.
PhaseTrace generate_phase(const NoiseSpec& spec, double duration, double sample_rate, std::uint64_t seed);

/// Lorentzian FWHM of a white-FM field, pi * h0.
double lorentzian_linewidth(double h0);

/// Inverse of lorentzian_linewidth.
double white_fm_level(double linewidth);

struct EcdlGeometry {
    double delta_nu_ld = 10.0e6;      ///< solitary diode linewidth, Hz
    double cavity_length = 0.20;      ///< external cavity length, m
    double diode_length = 1.0e-3;     ///< diode chip length, m
    double refractive_index = 3.5;

    bool operator==(const EcdlGeometry&) const = default;
};

void validate(const EcdlGeometry& geom);

/// Narrowed linewidth delta_nu_ld / (1 + L / (n L_ld))^2.
double ecdl_linewidth(const EcdlGeometry& geom);

/// Adds the phase of a linear frequency ramp, 2 pi (rate / 2) t^2, with t the
/// absolute sample time.
PhaseTrace add_drift(const PhaseTrace& trace, double rate);

} // namespace laserlock
