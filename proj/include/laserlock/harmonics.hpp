#pragma once

#include "laserlock/errors.hpp"
#include "laserlock/metrics.hpp"
#include "laserlock/trace.hpp"

#include <Eigen/Core>

#include <cmath>

namespace laserlock {

/// Integrated phase noise and the carrier fraction it implies.
struct PhaseMetrics {
    double phi2_rms = 0.0;         ///< rad^2, carrier excluded
    double bandwidth = 1.0e7;      ///< Hz
    double carrier_fraction = 1.0;
};

/// Phase of the m-th harmonic (or of an m-photon process): samples scaled by m.
PhaseTrace multiply_phase(const PhaseTrace& trace, int m);

/// Carrier power fraction exp(-phi2) of a field with Gaussian phase noise.
inline double carrier_fraction(double phi2_rms) {
    detail::require(std::isfinite(phi2_rms) && phi2_rms >= 0.0, "phi2_rms", "must be >= 0");
    return std::exp(-phi2_rms);
}

template <typename Derived>
auto carrier_fraction(const Eigen::ArrayBase<Derived>& phi2_rms) {
    return (-phi2_rms).exp();
}

/// Excitation efficiency of an n-photon process driven by a field whose
/// fundamental carries phi2 rad^2: exp(-(n phi_rms)^2). Identical to
/// carrier_fraction(n^2 phi2) by construction.
inline double excitation_efficiency(double phi2_rms_fundamental, int n_photons) {
    detail::require(n_photons >= 1, "n_photons", "must be >= 1");
    const double n = static_cast<double>(n_photons);
    return carrier_fraction(n * n * phi2_rms_fundamental);
}

template <typename Derived>
auto excitation_efficiency(const Eigen::ArrayBase<Derived>& phi2_rms_fundamental, int n_photons) {
    const double n = static_cast<double>(n_photons);
    return carrier_fraction(n * n * phi2_rms_fundamental);
}

enum class Sideband {
    single,  ///< the spectrum is a one-sided density: integrate [0, B]
    both,    ///< the spectrum is a per-sideband density: count both sidebands
};

/// Phase variance within `bandwidth` of the carrier, excluding the carrier bin.
///
/// phase / frequency spectra: sum of S_phi * df over 0 < f <= B (S_phi =
/// S_nu / f^2 for frequency spectra), doubled for Sideband::both. With the
/// default Sideband::single and a one-sided estimate this is the total phase
/// variance, so exp(-result) is the carrier fraction.
/// field spectra: -ln(carrier / (carrier + pedestal within +-B)).
double rms_phase_in_bandwidth(const SpectrumEstimate& spectrum, double bandwidth,
                              Sideband sideband = Sideband::single);

PhaseMetrics phase_metrics(const SpectrumEstimate& spectrum, double bandwidth);

/// Two-photon excitation line: the self-convolved field spectrum of the
/// driving light (detuning axis at the atomic frequency) convolved with a
/// Lorentzian of FWHM natural_width + transit_width, sampled on
/// detuning_grid and normalized to unit peak. The laser spectrum must be on a
/// uniform grid.
Eigen::VectorXd excitation_spectrum(const SpectrumEstimate& laser_spectrum, double natural_width,
                                    double transit_width, const Eigen::VectorXd& detuning_grid);

/// Model field spectrum: Lorentzian of FWHM `fwhm` on a uniform two-sided
/// grid of spacing bin_width spanning +-half_span. fwhm = 0 gives a single
/// carrier bin.
SpectrumEstimate lorentzian_field_spectrum(double fwhm, double bin_width, double half_span);

/// Full width of a sampled single-peaked profile at `level` times its peak,
/// with linear interpolation between grid points.
double profile_width(const Eigen::VectorXd& grid, const Eigen::VectorXd& profile, double level);

} // namespace laserlock
