#pragma once

#include "laserlock/trace.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace laserlock {

enum class SpectrumKind { phase, frequency, field };

std::string to_string(SpectrumKind kind);
SpectrumKind spectrum_kind_from_string(const std::string& name);

/// Frequency-domain analysis output.
///
/// phase / frequency: one-sided density (rad^2/Hz, Hz^2/Hz) on [0, fs/2].
/// field: two-sided power per bin on [-fs/2, fs/2), normalized so the peak
/// bin is 1 (0 dB carrier); `reference_power` is the peak-bin power before
/// normalization, so psd * reference_power sums to the total field power.
struct SpectrumEstimate {
    Eigen::VectorXd freqs;
    Eigen::VectorXd psd;
    double rbw = 0.0;          ///< Hz (window ENBW)
    double bin_width = 0.0;    ///< grid spacing, Hz
    int averages = 0;
    SpectrumKind kind = SpectrumKind::phase;
    double reference_power = 1.0;

    /// Index of the grid point closest to f.
    Eigen::Index bin_of(double f) const;
};

/// Beat phase 2 pi offset t + phi_a(t) - phi_b(t).
PhaseTrace beat(const PhaseTrace& a, const PhaseTrace& b, double offset);

/// Welch estimate with a Hann window and per-segment mean removal.
/// kind = frequency analyses the derived frequency trace; kind = field the
/// complex field exp(i phi) (two-sided, density in 1/Hz).
SpectrumEstimate estimate_psd(const PhaseTrace& trace, Eigen::Index segment_len, double overlap,
                              SpectrumKind kind);

/// Power spectrum of exp(i phi): rectangular window so that bin powers sum
/// exactly to the unit field power, non-overlapping segments of
/// round(fs / rbw) samples, peak-normalized.
SpectrumEstimate field_spectrum(const PhaseTrace& trace, double rbw);

/// Fraction of the total power in the peak (carrier) bin of a field spectrum.
double carrier_bin_fraction(const SpectrumEstimate& field);

/// Lorentzian FWHM fitted around the peak of a field spectrum. Uses a
/// weighted linear least-squares fit of 1/S = c (f - f0)^2 + a over bins
/// above `min_level` of the peak.
double fit_lorentzian_fwhm(const SpectrumEstimate& field, double min_level = 0.1);

/// Pi-type counter with zero dead time: mean frequency over contiguous gates.
/// reading_k = (phi((k+1) g) - phi(k g)) / (2 pi g) + nu0.
std::vector<double> counter(const PhaseTrace& trace, double gate, double nu0);

struct AllanWarning {
    double tau;
    std::string message;
};

struct AllanResult {
    std::vector<double> taus;
    std::vector<double> sigma_y;
    double gate = 0.0;
    double nu0 = 0.0;
    bool drift_subtracted = false;
    std::vector<AllanWarning> warnings;
};

/// Overlapping Allan deviation of fractional frequency (reading differences
/// divided by nu0). Taus must be integer multiples of the gate; a tau with
/// fewer than 3 non-overlapping averages is omitted and recorded as a warning.
/// With subtract_drift, a least-squares line is removed from the readings first.
AllanResult allan(const std::vector<double>& readings, double gate, double nu0,
                  const std::vector<double>& taus, bool subtract_drift = false);

/// Log-spaced taus (multiples of gate) spanning [gate, max_tau].
std::vector<double> log_taus(double gate, double max_tau, int per_decade = 5);

} // namespace laserlock
