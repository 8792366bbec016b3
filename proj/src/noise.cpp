#include "laserlock/noise.hpp"

#include "laserlock/errors.hpp"
#include "laserlock/fft.hpp"
#include "laserlock/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace laserlock {

NoiseSpec NoiseSpec::white_fm(double h0, double f_low, double f_high) {
    NoiseSpec spec;
    spec.set_coefficient(0, h0);
    spec.f_low = f_low;
    spec.f_high = f_high;
    return spec;
}

void validate(const NoiseSpec& spec) {
    static constexpr const char* keys[] = {"laser.noise.h_m2", "laser.noise.h_m1", "laser.noise.h_0",
                                           "laser.noise.h_p1", "laser.noise.h_p2"};
    for (std::size_t i = 0; i < spec.h.size(); ++i)
        detail::require(std::isfinite(spec.h[i]) && spec.h[i] >= 0.0, keys[i], "must be finite and >= 0");
    detail::require(std::isfinite(spec.f_low) && spec.f_low > 0.0, "laser.noise.f_low_hz", "must be > 0");
    detail::require(std::isfinite(spec.f_high) && spec.f_high > spec.f_low, "laser.noise.f_high_hz",
                    "must exceed f_low_hz");
    detail::require(std::isfinite(spec.drift_rate), "laser.noise.drift_rate_hz_per_s", "must be finite");
}

double frequency_psd(const NoiseSpec& spec, double f) {
    if (f > spec.f_high) return 0.0;
    const double fe = std::max(f, spec.f_low);
    double s = 0.0;
    for (int alpha = NoiseSpec::kMinExponent; alpha <= NoiseSpec::kMaxExponent; ++alpha) {
        const double h = spec.coefficient(alpha);
        if (h != 0.0) s += h * std::pow(fe, alpha);
    }
    return s;
}

PhaseTrace generate_phase(const NoiseSpec& spec, double duration, double sample_rate, std::uint64_t seed) {
    validate(spec);
    detail::require(std::isfinite(sample_rate) && sample_rate > 0.0, "sample_rate", "must be > 0");
    detail::require(std::isfinite(duration) && duration * sample_rate >= 2.0, "duration",
                    "duration * sample_rate must be >= 2");
    const bool silent = std::all_of(spec.h.begin(), spec.h.end(), [](double h) { return h == 0.0; });
    detail::require(silent || spec.f_high <= 0.5 * sample_rate * (1.0 + 1e-12), "laser.noise.f_high_hz",
                    "exceeds Nyquist frequency " + std::to_string(0.5 * sample_rate));

    const auto n = static_cast<Eigen::Index>(std::llround(duration * sample_rate)) + 1;
    const auto m = static_cast<Eigen::Index>(fft::next_pow2(2 * static_cast<std::size_t>(n)));
    const double df = sample_rate / static_cast<double>(m);
    detail::require(silent || df <= spec.f_high, "duration",
                    "spectral grid spacing " + std::to_string(df) + " Hz leaves no bin below f_high");

    GaussianSource gauss(seed);
    Eigen::VectorXcd half = Eigen::VectorXcd::Zero(m / 2 + 1);
    const double base = static_cast<double>(m) * sample_rate;
    bool any = false;
    for (Eigen::Index k = 1; k <= m / 2; ++k) {
        const double g1 = gauss();
        const double g2 = gauss();
        const double s = frequency_psd(spec, static_cast<double>(k) * df);
        if (s == 0.0) continue;
        any = true;
        if (k == m / 2) {
            half[k] = {std::sqrt(s * base / 2.0) * g1, 0.0};
        } else {
            const double a = std::sqrt(s * base / 4.0);
            half[k] = {a * g1, a * g2};
        }
    }

    Eigen::VectorXd phase = Eigen::VectorXd::Zero(n);
    if (any) {
        const Eigen::VectorXd nu = fft::inverse_real(half, m);
        const double step = 2.0 * std::numbers::pi / sample_rate;
        for (Eigen::Index i = 1; i < n; ++i) phase[i] = phase[i - 1] + step * nu[i - 1];
    }
    PhaseTrace trace(sample_rate, std::move(phase), 0.0, "free_run");
    if (spec.drift_rate != 0.0) return add_drift(trace, spec.drift_rate);
    return trace;
}

double lorentzian_linewidth(double h0) {
    detail::require(std::isfinite(h0) && h0 >= 0.0, "h0", "must be >= 0");
    return std::numbers::pi * h0;
}

double white_fm_level(double linewidth) {
    detail::require(std::isfinite(linewidth) && linewidth >= 0.0, "linewidth", "must be >= 0");
    return linewidth / std::numbers::pi;
}

void validate(const EcdlGeometry& geom) {
    detail::require(std::isfinite(geom.delta_nu_ld) && geom.delta_nu_ld > 0.0,
                    "laser.geometry.solitary_linewidth_hz", "must be > 0");
    detail::require(std::isfinite(geom.cavity_length) && geom.cavity_length >= 0.0,
                    "laser.geometry.cavity_length_m", "must be >= 0");
    detail::require(std::isfinite(geom.diode_length) && geom.diode_length > 0.0,
                    "laser.geometry.diode_length_m", "must be > 0");
    detail::require(std::isfinite(geom.refractive_index) && geom.refractive_index >= 1.0,
                    "laser.geometry.refractive_index", "must be >= 1");
}

double ecdl_linewidth(const EcdlGeometry& geom) {
    validate(geom);
    const double factor = 1.0 + geom.cavity_length / (geom.refractive_index * geom.diode_length);
    return geom.delta_nu_ld / (factor * factor);
}

PhaseTrace add_drift(const PhaseTrace& trace, double rate) {
    detail::require(std::isfinite(rate), "drift_rate", "must be finite");
    if (rate == 0.0) return trace;
    Eigen::VectorXd out = trace.samples();
    for (Eigen::Index n = 0; n < out.size(); ++n) {
        const double t = trace.time(n);
        out[n] += std::numbers::pi * rate * t * t;
    }
    return trace.with_samples(std::move(out));
}

} // namespace laserlock
