#include "laserlock/harmonics.hpp"

#include "laserlock/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace laserlock {

PhaseTrace multiply_phase(const PhaseTrace& trace, int m) {
    detail::require(m >= 1, "m", "harmonic order must be >= 1");
    if (m == 1) return trace;
    return trace.with_samples(trace.samples() * static_cast<double>(m));
}

double rms_phase_in_bandwidth(const SpectrumEstimate& spectrum, double bandwidth, Sideband sideband) {
    detail::require(std::isfinite(bandwidth) && bandwidth > 0.0, "bandwidth", "must be > 0");
    detail::require(spectrum.freqs.size() == spectrum.psd.size() && spectrum.freqs.size() >= 2, "spectrum",
                    "empty or inconsistent spectrum");
    detail::require(spectrum.bin_width <= bandwidth / 100.0 * (1.0 + 1e-9), "spectrum.rbw",
                    "resolution " + std::to_string(spectrum.bin_width) + " Hz is coarser than bandwidth/100");

    if (spectrum.kind == SpectrumKind::field) {
        Eigen::Index peak = 0;
        const double carrier = spectrum.psd.maxCoeff(&peak);
        const double fc = spectrum.freqs[peak];
        detail::require(spectrum.freqs[0] <= fc - bandwidth * (1.0 - 1e-9) &&
                            spectrum.freqs[spectrum.freqs.size() - 1] >= fc + bandwidth * (1.0 - 1e-9) -
                                                                            spectrum.bin_width,
                        "spectrum", "field spectrum must span +-" + std::to_string(bandwidth) +
                                        " Hz around the carrier");
        double pedestal = 0.0;
        for (Eigen::Index k = 0; k < spectrum.psd.size(); ++k)
            if (k != peak && std::abs(spectrum.freqs[k] - fc) <= bandwidth) pedestal += spectrum.psd[k];
        return -std::log(carrier / (carrier + pedestal));
    }

    const double top = spectrum.freqs[spectrum.freqs.size() - 1];
    detail::require(top >= bandwidth * (1.0 - 1e-9), "spectrum",
                    "spans only " + std::to_string(top) + " Hz; integration needs " + std::to_string(bandwidth) +
                        " Hz (raise the sample rate to at least " + std::to_string(2.0 * bandwidth) + " Hz)");
    double sum = 0.0;
    for (Eigen::Index k = 0; k < spectrum.psd.size(); ++k) {
        const double f = spectrum.freqs[k];
        if (f <= 0.0) continue;  // carrier bin
        if (f > bandwidth * (1.0 + 1e-12)) break;
        const double s = spectrum.kind == SpectrumKind::frequency ? spectrum.psd[k] / (f * f) : spectrum.psd[k];
        sum += s * spectrum.bin_width;
    }
    return sideband == Sideband::both ? 2.0 * sum : sum;
}

PhaseMetrics phase_metrics(const SpectrumEstimate& spectrum, double bandwidth) {
    PhaseMetrics m;
    m.bandwidth = bandwidth;
    m.phi2_rms = rms_phase_in_bandwidth(spectrum, bandwidth);
    m.carrier_fraction = carrier_fraction(m.phi2_rms);
    return m;
}

namespace {

bool uniform_grid(const Eigen::VectorXd& f, double& step) {
    if (f.size() < 2) {
        step = 1.0;
        return f.size() == 1;
    }
    step = (f[f.size() - 1] - f[0]) / static_cast<double>(f.size() - 1);
    if (!(step > 0.0)) return false;
    for (Eigen::Index i = 1; i < f.size(); ++i)
        if (std::abs(f[i] - f[i - 1] - step) > 1e-6 * step) return false;
    return true;
}

Eigen::VectorXd self_convolve(const Eigen::VectorXd& s) {
    const Eigen::Index n = s.size();
    const Eigen::Index out_len = 2 * n - 1;
    const auto m = static_cast<Eigen::Index>(fft::next_pow2(static_cast<std::size_t>(out_len)));
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(m < 2 ? 2 : m);
    padded.head(n) = s;
    fft::Engine engine;
    Eigen::VectorXcd spec = engine.forward_real(padded);
    spec = spec.cwiseProduct(spec);
    Eigen::VectorXd full = engine.inverse_real(spec, padded.size());
    return full.head(out_len).cwiseMax(0.0);
}

} // namespace

Eigen::VectorXd excitation_spectrum(const SpectrumEstimate& laser_spectrum, double natural_width,
                                    double transit_width, const Eigen::VectorXd& detuning_grid) {
    detail::require(std::isfinite(natural_width) && natural_width >= 0.0, "natural_width", "must be >= 0");
    detail::require(std::isfinite(transit_width) && transit_width >= 0.0, "transit_width", "must be >= 0");
    detail::require(detuning_grid.size() >= 1, "detuning_grid", "must be non-empty");
    for (Eigen::Index i = 1; i < detuning_grid.size(); ++i)
        detail::require(detuning_grid[i] > detuning_grid[i - 1], "detuning_grid", "must be increasing");
    double step = 0.0;
    detail::require(uniform_grid(laser_spectrum.freqs, step), "laser_spectrum", "needs a uniform frequency grid");

    const Eigen::VectorXd drive = self_convolve(laser_spectrum.psd.cwiseMax(0.0));
    const double origin = 2.0 * laser_spectrum.freqs[0];
    const double width = natural_width + transit_width;
    const double cutoff = 1e-14 * drive.maxCoeff();

    Eigen::VectorXd profile = Eigen::VectorXd::Zero(detuning_grid.size());
    if (width > 0.0) {
        const double inv_half = 2.0 / width;
        for (Eigen::Index k = 0; k < drive.size(); ++k) {
            if (drive[k] <= cutoff) continue;
            const double g = origin + static_cast<double>(k) * step;
            profile += (drive[k] / (1.0 + ((detuning_grid.array() - g) * inv_half).square())).matrix();
        }
    } else {
        for (Eigen::Index i = 0; i < detuning_grid.size(); ++i) {
            const double pos = (detuning_grid[i] - origin) / step;
            const auto k = static_cast<Eigen::Index>(std::floor(pos));
            if (k < 0 || k >= drive.size()) continue;
            const double frac = pos - static_cast<double>(k);
            const double right = k + 1 < drive.size() ? drive[k + 1] : 0.0;
            profile[i] = (1.0 - frac) * drive[k] + frac * right;
        }
    }
    const double peak = profile.maxCoeff();
    if (peak > 0.0) profile /= peak;
    return profile;
}

SpectrumEstimate lorentzian_field_spectrum(double fwhm, double bin_width, double half_span) {
    detail::require(std::isfinite(fwhm) && fwhm >= 0.0, "fwhm", "must be >= 0");
    detail::require(bin_width > 0.0 && half_span >= bin_width, "bin_width", "must be > 0 and <= half_span");
    const auto half = static_cast<Eigen::Index>(std::llround(half_span / bin_width));
    const Eigen::Index n = 2 * half + 1;
    SpectrumEstimate s;
    s.kind = SpectrumKind::field;
    s.bin_width = bin_width;
    s.rbw = bin_width;
    s.averages = 1;
    s.freqs = Eigen::VectorXd::LinSpaced(n, -static_cast<double>(half) * bin_width,
                                         static_cast<double>(half) * bin_width);
    if (fwhm == 0.0) {
        s.psd = Eigen::VectorXd::Zero(n);
        s.psd[half] = 1.0;
    } else {
        s.psd = (1.0 / (1.0 + (s.freqs.array() * (2.0 / fwhm)).square())).matrix();
    }
    s.reference_power = 1.0 / s.psd.sum();
    return s;
}

double profile_width(const Eigen::VectorXd& grid, const Eigen::VectorXd& profile, double level) {
    detail::require(grid.size() == profile.size() && grid.size() >= 3, "profile", "grid/profile mismatch");
    Eigen::Index peak = 0;
    const double top = profile.maxCoeff(&peak);
    const double target = level * top;
    Eigen::Index lo = peak;
    while (lo > 0 && profile[lo - 1] >= target) --lo;
    Eigen::Index hi = peak;
    while (hi + 1 < profile.size() && profile[hi + 1] >= target) ++hi;
    detail::require(lo > 0 && hi + 1 < profile.size(), "profile", "level not crossed inside the grid");
    auto cross = [&](Eigen::Index inside, Eigen::Index outside) {
        const double t = (profile[inside] - target) / (profile[inside] - profile[outside]);
        return grid[inside] + t * (grid[outside] - grid[inside]);
    };
    return cross(hi, hi + 1) - cross(lo, lo - 1);
}

} // namespace laserlock
