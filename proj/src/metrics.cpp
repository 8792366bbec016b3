#include "laserlock/metrics.hpp"

#include "laserlock/errors.hpp"
#include "laserlock/fft.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace laserlock {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::VectorXd hann(Eigen::Index n) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

// Position of FFT bin k after shifting zero frequency to the centre.
Eigen::Index shifted_position(Eigen::Index k, Eigen::Index n) {
    const Eigen::Index half = (n + 1) / 2;
    return k >= half ? k - half : k + (n - half);
}

double shifted_frequency(Eigen::Index j, Eigen::Index n, double fs) {
    const Eigen::Index half = (n + 1) / 2;
    const Eigen::Index k = (j + half) % n;
    const Eigen::Index signed_k = k >= half ? k - n : k;
    return static_cast<double>(signed_k) * fs / static_cast<double>(n);
}

} // namespace

std::string to_string(SpectrumKind kind) {
    switch (kind) {
    case SpectrumKind::phase: return "phase";
    case SpectrumKind::frequency: return "frequency";
    case SpectrumKind::field: return "field";
    }
    return "unknown";
}

SpectrumKind spectrum_kind_from_string(const std::string& name) {
    if (name == "phase") return SpectrumKind::phase;
    if (name == "frequency") return SpectrumKind::frequency;
    if (name == "field") return SpectrumKind::field;
    throw ValidationError("kind", "unknown spectrum kind '" + name + "'");
}

Eigen::Index SpectrumEstimate::bin_of(double f) const {
    Eigen::Index best = 0;
    (freqs.array() - f).abs().minCoeff(&best);
    return best;
}

PhaseTrace beat(const PhaseTrace& a, const PhaseTrace& b, double offset) {
    if (a.sample_rate() != b.sample_rate())
        throw ValidationError("beat", "sample rates differ");
    if (a.size() != b.size()) throw ValidationError("beat", "trace lengths differ");
    detail::require(std::isfinite(offset), "beat.offset", "must be finite");
    Eigen::VectorXd out = a.samples() - b.samples();
    if (offset != 0.0) {
        for (Eigen::Index n = 0; n < out.size(); ++n) out[n] += kTwoPi * offset * a.time(n);
    }
    return PhaseTrace(a.sample_rate(), std::move(out), a.t0(), "beat");
}

SpectrumEstimate estimate_psd(const PhaseTrace& trace, Eigen::Index segment_len, double overlap,
                              SpectrumKind kind) {
    const double fs = trace.sample_rate();
    const Eigen::VectorXd x = kind == SpectrumKind::frequency ? trace.frequency() : trace.samples();
    detail::require(overlap >= 0.0 && overlap < 1.0, "overlap", "must lie in [0, 1)");
    detail::require(segment_len >= 4, "segment_len", "must be at least 4 samples");
    detail::require(segment_len <= x.size(), "segment_len",
                    "exceeds trace length " + std::to_string(x.size()));
    const auto hop = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::llround(static_cast<double>(segment_len) * (1.0 - overlap))));
    const Eigen::Index count = 1 + (x.size() - segment_len) / hop;

    const Eigen::VectorXd w = hann(segment_len);
    const double s1 = w.sum();
    const double s2 = w.squaredNorm();
    const double norm = 1.0 / (fs * s2);

    SpectrumEstimate est;
    est.kind = kind;
    est.averages = static_cast<int>(count);
    est.rbw = fs * s2 / (s1 * s1);
    est.bin_width = fs / static_cast<double>(segment_len);

    fft::Engine engine;
    if (kind == SpectrumKind::field) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(segment_len);
        Eigen::VectorXcd seg(segment_len);
        for (Eigen::Index s = 0; s < count; ++s) {
            const Eigen::Index start = s * hop;
            for (Eigen::Index i = 0; i < segment_len; ++i)
                seg[i] = w[i] * std::polar(1.0, x[start + i]);
            acc += engine.forward(seg).cwiseAbs2();
        }
        est.freqs.resize(segment_len);
        est.psd.resize(segment_len);
        for (Eigen::Index k = 0; k < segment_len; ++k) est.psd[shifted_position(k, segment_len)] = acc[k];
        for (Eigen::Index j = 0; j < segment_len; ++j) est.freqs[j] = shifted_frequency(j, segment_len, fs);
        est.psd *= norm / static_cast<double>(count);
        return est;
    }

    const Eigen::Index bins = segment_len / 2 + 1;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(bins);
    for (Eigen::Index s = 0; s < count; ++s) {
        const auto segment = x.segment(s * hop, segment_len);
        const Eigen::VectorXd windowed = (segment.array() - segment.mean()).matrix().cwiseProduct(w);
        acc += engine.forward_real(windowed).cwiseAbs2();
    }
    est.psd = acc * (norm / static_cast<double>(count));
    // fold negative frequencies onto the one-sided grid
    const Eigen::Index last = segment_len % 2 == 0 ? bins - 1 : bins;
    for (Eigen::Index k = 1; k < last; ++k) est.psd[k] *= 2.0;
    est.freqs = Eigen::VectorXd::LinSpaced(bins, 0.0, static_cast<double>(bins - 1) * est.bin_width);
    return est;
}

SpectrumEstimate field_spectrum(const PhaseTrace& trace, double rbw) {
    detail::require(std::isfinite(rbw) && rbw > 0.0, "rbw", "must be > 0");
    const double fs = trace.sample_rate();
    const double span = static_cast<double>(trace.size()) / fs;
    detail::require(rbw >= 2.0 / span * (1.0 - 1e-9), "rbw",
                    "must be at least 2 / duration = " + std::to_string(2.0 / span) + " Hz");
    const auto len = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::llround(fs / rbw)));
    const Eigen::Index count = trace.size() / len;
    detail::require(count >= 1, "rbw", "segment longer than trace");

    fft::Engine engine;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(len);
    Eigen::VectorXcd seg(len);
    const Eigen::VectorXd& phi = trace.samples();
    for (Eigen::Index s = 0; s < count; ++s) {
        for (Eigen::Index i = 0; i < len; ++i) seg[i] = std::polar(1.0, phi[s * len + i]);
        acc += engine.forward(seg).cwiseAbs2();
    }
    acc /= static_cast<double>(len) * static_cast<double>(len) * static_cast<double>(count);

    SpectrumEstimate est;
    est.kind = SpectrumKind::field;
    est.averages = static_cast<int>(count);
    est.bin_width = fs / static_cast<double>(len);
    est.rbw = est.bin_width;
    est.freqs.resize(len);
    est.psd.resize(len);
    for (Eigen::Index k = 0; k < len; ++k) est.psd[shifted_position(k, len)] = acc[k];
    for (Eigen::Index j = 0; j < len; ++j) est.freqs[j] = shifted_frequency(j, len, fs);
    est.reference_power = est.psd.maxCoeff();
    if (est.reference_power > 0.0) est.psd /= est.reference_power;
    return est;
}

double carrier_bin_fraction(const SpectrumEstimate& field) {
    if (field.kind != SpectrumKind::field)
        throw ValidationError("spectrum.kind", "carrier fraction needs a field spectrum");
    const double total = field.psd.sum();
    if (total <= 0.0) return 0.0;
    return field.psd.maxCoeff() / total;
}

double fit_lorentzian_fwhm(const SpectrumEstimate& field, double min_level) {
    Eigen::Index peak = 0;
    const double top = field.psd.maxCoeff(&peak);
    detail::require(top > 0.0, "spectrum", "empty spectrum");
    Eigen::Index lo = peak;
    Eigen::Index hi = peak;
    while (lo > 0 && field.psd[lo - 1] >= min_level * top) --lo;
    while (hi + 1 < field.psd.size() && field.psd[hi + 1] >= min_level * top) ++hi;
    const Eigen::Index n = hi - lo + 1;
    detail::require(n >= 5, "spectrum", "fewer than 5 bins above the fit level; rbw too coarse");

    const double f_peak = field.freqs[peak];
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = field.psd[lo + i];
        const double f = field.freqs[lo + i] - f_peak;
        // weight s^2 for 1/s when the relative scatter of s is uniform
        a(i, 0) = s;
        a(i, 1) = s * f;
        a(i, 2) = s * f * f;
        y[i] = 1.0;  // s * (1 / s)
    }
    const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(y);
    const double c = coef[2];
    detail::require(c > 0.0, "spectrum", "peak is not Lorentzian-like (non-positive curvature)");
    const double floor = coef[0] - coef[1] * coef[1] / (4.0 * c);
    detail::require(floor > 0.0, "spectrum", "degenerate Lorentzian fit");
    return 2.0 * std::sqrt(floor / c);
}

std::vector<double> counter(const PhaseTrace& trace, double gate, double nu0) {
    const double fs = trace.sample_rate();
    detail::require(std::isfinite(gate) && gate * fs >= 10.0 * (1.0 - 1e-9), "gate",
                    "must span at least 10 samples");
    detail::require(gate <= trace.duration() * (1.0 + 1e-12), "gate",
                    "longer than the trace (" + std::to_string(trace.duration()) + " s)");
    const auto m = static_cast<Eigen::Index>(std::llround(gate * fs));
    const Eigen::Index count = (trace.size() - 1) / m;
    const double actual_gate = static_cast<double>(m) / fs;
    const Eigen::VectorXd& phi = trace.samples();
    std::vector<double> readings(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < count; ++k)
        readings[static_cast<std::size_t>(k)] = (phi[(k + 1) * m] - phi[k * m]) / (kTwoPi * actual_gate) + nu0;
    return readings;
}

AllanResult allan(const std::vector<double>& readings, double gate, double nu0, const std::vector<double>& taus,
                  bool subtract_drift) {
    detail::require(std::isfinite(gate) && gate > 0.0, "gate", "must be > 0");
    detail::require(std::isfinite(nu0) && nu0 > 0.0, "nu0", "must be > 0");
    AllanResult out;
    out.gate = gate;
    out.nu0 = nu0;
    out.drift_subtracted = subtract_drift;

    const auto count = static_cast<Eigen::Index>(readings.size());
    Eigen::VectorXd y(count);
    for (Eigen::Index i = 0; i < count; ++i)
        y[i] = readings[static_cast<std::size_t>(i)] - (count > 0 ? readings.front() : 0.0);
    if (subtract_drift && count >= 2) {
        const Eigen::VectorXd k = Eigen::VectorXd::LinSpaced(count, 0.0, static_cast<double>(count - 1));
        const double km = k.mean();
        const double ym = y.mean();
        const double slope = ((k.array() - km) * (y.array() - ym)).sum() / (k.array() - km).square().sum();
        y = (y.array() - ym - slope * (k.array() - km)).matrix();
    }

    Eigen::VectorXd prefix(count + 1);
    prefix[0] = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) prefix[i + 1] = prefix[i] + y[i];

    double previous = 0.0;
    for (double tau : taus) {
        detail::require(std::isfinite(tau) && tau > previous, "taus", "must be positive and increasing");
        previous = tau;
        const auto m = static_cast<Eigen::Index>(std::llround(tau / gate));
        detail::require(m >= 1 && std::abs(static_cast<double>(m) * gate - tau) <= 1e-6 * tau, "taus",
                        "tau " + std::to_string(tau) + " s is not an integer multiple of the gate");
        if (count / m < 3) {
            out.warnings.push_back({tau, "fewer than 3 averages; omitted"});
            continue;
        }
        const Eigen::Index terms = count - 2 * m + 1;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < terms; ++k) {
            const double d = (prefix[k + 2 * m] - 2.0 * prefix[k + m] + prefix[k]) / static_cast<double>(m);
            acc += d * d;
        }
        out.taus.push_back(tau);
        out.sigma_y.push_back(std::sqrt(acc / (2.0 * static_cast<double>(terms))) / nu0);
    }
    return out;
}

std::vector<double> log_taus(double gate, double max_tau, int per_decade) {
    std::vector<double> taus;
    long long last = 0;
    for (int i = 0;; ++i) {
        const auto m = static_cast<long long>(std::llround(std::pow(10.0, static_cast<double>(i) / per_decade)));
        if (static_cast<double>(m) * gate > max_tau * (1.0 + 1e-12)) break;
        if (m != last) taus.push_back(static_cast<double>(m) * gate);
        last = m;
    }
    return taus;
}

} // namespace laserlock
