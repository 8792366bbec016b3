#include "laserlock/errors.hpp"
#include "laserlock/harmonics.hpp"
#include "laserlock/metrics.hpp"
#include "laserlock/noise.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace laserlock;

namespace {

constexpr double kPi = std::numbers::pi;

PhaseTrace zeros(double fs, Eigen::Index n) { return PhaseTrace(fs, Eigen::VectorXd::Zero(n)); }

double integral(const SpectrumEstimate& s) { return s.psd.sum() * s.bin_width; }

} // namespace

TEST(Beat, CommonModeCancels) {
    const auto a = generate_phase(NoiseSpec::white_fm(10, 1, 5e3), 1.0, 1e4, 1);
    const auto b = beat(a, a, 0.0);
    EXPECT_EQ(b.samples().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Beat, NoiselessOffsetIsOneBin) {
    const auto b = beat(zeros(1e6, 100001), zeros(1e6, 100001), 1e5);
    const auto field = field_spectrum(b, 100.0);
    EXPECT_NEAR(field.freqs[field.bin_of(1e5)], 1e5, 1e-6);
    EXPECT_NEAR(field.psd[field.bin_of(1e5)], 1.0, 1e-12);
    EXPECT_NEAR(carrier_bin_fraction(field), 1.0, 1e-9);
}

TEST(Beat, IndependentNoiseAddsInVariance) {
    NoiseSpec spec;
    spec.set_coefficient(2, 1e-6);
    spec.f_high = 5e4;
    double ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = generate_phase(spec, 0.5, 1e5, 2 * seed);
        const auto b = generate_phase(spec, 0.5, 1e5, 2 * seed + 1);
        ratio += beat(a, b, 0.0).variance() / (a.variance() + b.variance()) / 10.0;
    }
    EXPECT_NEAR(ratio, 1.0, 0.1);
}

TEST(EstimatePsd, ZeroTraceGivesZeroPsd) {
    const auto s = estimate_psd(zeros(1e3, 4096), 1024, 0.5, SpectrumKind::phase);
    EXPECT_EQ(s.psd.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.averages, 7);
}

TEST(EstimatePsd, UnitSinusoidCarriesHalfPower) {
    const double fs = 1e4;
    Eigen::VectorXd x(100000);
    for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * kPi * 1234.5 * static_cast<double>(n) / fs);
    const auto s = estimate_psd(PhaseTrace(fs, x), 4096, 0.5, SpectrumKind::phase);
    const Eigen::Index k = s.bin_of(1234.5);
    EXPECT_NEAR(s.psd.segment(k - 4, 9).sum() * s.bin_width, 0.5, 0.01);
    EXPECT_NEAR(s.rbw / s.bin_width, 1.5, 1e-9);
}

TEST(EstimatePsd, WhiteFrequencyNoiseIsFlat) {
    const auto t = generate_phase(NoiseSpec::white_fm(3.0, 1.0, 5e4), 2.0, 1e5, 4);
    const auto s = estimate_psd(t, 16384, 0.5, SpectrumKind::frequency);
    ASSERT_GE(s.averages, 20);
    EXPECT_NEAR(s.psd.segment(10, 6000).mean() / 3.0, 1.0, 0.1);
    // independent periodogram agrees
    const auto ref = oracle::hann_periodogram(t.frequency(), 16384, 1e5);
    EXPECT_NEAR(s.psd.segment(10, 6000).mean() / ref.segment(10, 6000).mean(), 1.0, 0.05);
}

TEST(EstimatePsd, ParsevalForEveryKind) {
    // stationary phase (flicker and white PM) so a windowed estimate and the plain variance agree
    NoiseSpec spec;
    spec.set_coefficient(1, 1e-7);
    spec.set_coefficient(2, 1e-9);
    spec.f_low = 1.0;
    spec.f_high = 5e4;
    const auto t = generate_phase(spec, 2.0, 1e5, 5);
    const auto phase = estimate_psd(t, 8192, 0.5, SpectrumKind::phase);
    const auto freq = estimate_psd(t, 8192, 0.5, SpectrumKind::frequency);
    // per-segment variance is what a mean-removed periodogram sees
    double var_phi = 0.0, var_nu = 0.0;
    const Eigen::VectorXd nu = t.frequency();
    int segs = 0;
    for (Eigen::Index start = 0; start + 8192 <= nu.size(); start += 4096, ++segs) {
        const Eigen::VectorXd p = t.samples().segment(start, 8192);
        const Eigen::VectorXd v = nu.segment(start, 8192);
        var_phi += (p.array() - p.mean()).square().mean();
        var_nu += (v.array() - v.mean()).square().mean();
    }
    EXPECT_NEAR(integral(phase) / (var_phi / segs), 1.0, 0.05);
    EXPECT_NEAR(integral(freq) / (var_nu / segs), 1.0, 0.05);
    const auto field = estimate_psd(t, 8192, 0.5, SpectrumKind::field);
    EXPECT_NEAR(integral(field), 1.0, 1e-3);
    const auto fs = field_spectrum(t, 100.0);
    EXPECT_NEAR(fs.psd.sum() * fs.reference_power, 1.0, 1e-3);
}

TEST(EstimatePsd, RejectsBadArguments) {
    const auto t = zeros(1e3, 100);
    EXPECT_THROW(estimate_psd(t, 200, 0.5, SpectrumKind::phase), ValidationError);
    EXPECT_THROW(estimate_psd(t, 50, 1.0, SpectrumKind::phase), ValidationError);
}

TEST(FieldSpectrum, ZeroPhaseIsPureCarrier) {
    const auto f = field_spectrum(zeros(1e4, 10001), 10.0);
    EXPECT_EQ(carrier_bin_fraction(f), 1.0);
    EXPECT_EQ(f.freqs[f.bin_of(0.0)], 0.0);
}

TEST(FieldSpectrum, CarrierFractionFromSynthesizedPhaseNoise) {
    // white phase noise with variance 1e-3 rad^2
    NoiseSpec spec;
    spec.set_coefficient(2, 1e-3 / 5e4);
    spec.f_high = 5e4;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto t = generate_phase(spec, 1.0, 1e5, seed);
        EXPECT_NEAR(carrier_bin_fraction(field_spectrum(t, 100.0)), 0.999, 5e-4);
    }
}

TEST(FieldSpectrum, WhiteFmGivesLorentzianOfPiH0) {
    const double h0 = 30.0;
    double w = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        w += fit_lorentzian_fwhm(field_spectrum(generate_phase(NoiseSpec::white_fm(h0, 0.1, 1e4), 20.0, 2e4, seed), 5.0));
    EXPECT_NEAR(w / 5.0 / (kPi * h0), 1.0, 0.1);
}

TEST(Counter, ConstantFrequencyReadsConstant) {
    Eigen::VectorXd x(10001);
    for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = 2.0 * kPi * 37.0 * static_cast<double>(n) / 1e3;
    const auto r = counter(PhaseTrace(1e3, x), 0.1, 1e6);
    ASSERT_EQ(r.size(), 100u);
    for (double v : r) EXPECT_NEAR(v, 1e6 + 37.0, 1e-6);
}

TEST(Counter, DriftStepsByRateTimesGate) {
    const auto d = add_drift(zeros(1e3, 100001), 0.05);
    const auto r = counter(d, 1.0, 0.0);
    for (std::size_t k = 1; k < r.size(); ++k) EXPECT_NEAR(r[k] - r[k - 1], 0.05, 1e-9);
}

TEST(Counter, WhiteFmReadingVariance) {
    const double h0 = 4.0;
    const auto t = generate_phase(NoiseSpec::white_fm(h0, 0.01, 5e3), 100.0, 1e4, 8);
    const auto r = counter(t, 0.01, 0.0);
    double m = 0.0, v = 0.0;
    for (double x : r) m += x;
    m /= static_cast<double>(r.size());
    for (double x : r) v += (x - m) * (x - m);
    v /= static_cast<double>(r.size() - 1);
    EXPECT_NEAR(v / (h0 / (2.0 * 0.01)), 1.0, 0.05);
}

TEST(Allan, ConstantReadingsAreStable) {
    const std::vector<double> r(1000, 5e6);
    const auto a = allan(r, 0.1, 3e14, log_taus(0.1, 10.0));
    for (double s : a.sigma_y) EXPECT_EQ(s, 0.0);
}

TEST(Allan, WhiteFmOracle) {
    const double nu0 = 1e8;
    const double h0_frac = 1e-12;
    const auto t = generate_phase(NoiseSpec::white_fm(h0_frac * nu0 * nu0, 0.001, 500.0), 400.0, 1e3, 3);
    const auto a = allan(counter(t, 0.01, nu0), 0.01, nu0, log_taus(0.01, 1.0));
    ASSERT_FALSE(a.taus.empty());
    for (std::size_t i = 0; i < a.taus.size(); ++i)
        EXPECT_NEAR(a.sigma_y[i] / std::sqrt(h0_frac / (2.0 * a.taus[i])), 1.0, 0.1) << a.taus[i];
}

TEST(Allan, LinearDriftOracle) {
    const double nu0 = 3.08e14;
    const auto d = add_drift(zeros(100.0, 40001), 0.05);
    const auto a = allan(counter(d, 0.1, 0.0), 0.1, nu0, log_taus(0.1, 100.0));
    for (std::size_t i = 0; i < a.taus.size(); ++i)
        EXPECT_NEAR(a.sigma_y[i] / (0.05 * a.taus[i] / (std::sqrt(2.0) * nu0)), 1.0, 1e-6);
    const auto removed = allan(counter(d, 0.1, 0.0), 0.1, nu0, log_taus(0.1, 100.0), true);
    for (double s : removed.sigma_y) EXPECT_LT(s, 1e-25);
}

TEST(Allan, PowerLawSlopes) {
    const double nu0 = 1e6;
    struct Case {
        int alpha;
        double slope;
    };
    for (const Case c : {Case{0, -0.5}, Case{-2, 0.5}}) {
        NoiseSpec spec;
        spec.set_coefficient(c.alpha, 1.0);
        spec.f_low = 1e-4;
        spec.f_high = 50.0;
        std::vector<double> taus, sigmas;
        const auto t = generate_phase(spec, 2000.0, 100.0, 12);
        const auto a = allan(counter(t, 0.1, nu0), 0.1, nu0, log_taus(0.1, 100.0));
        for (std::size_t i = 0; i < a.taus.size(); ++i)
            if (a.taus[i] >= 0.5 && a.taus[i] <= 50.0) {
                taus.push_back(a.taus[i]);
                sigmas.push_back(a.sigma_y[i]);
            }
        EXPECT_NEAR(oracle::loglog_slope(taus, sigmas), c.slope, 0.1) << c.alpha;
    }
}

TEST(Allan, WarnsWhenTooFewAverages) {
    const std::vector<double> r(20, 1.0);
    const auto a = allan(r, 1.0, 1.0, {1.0, 5.0, 10.0});
    EXPECT_EQ(a.taus.size(), 2u);
    ASSERT_EQ(a.warnings.size(), 1u);
    EXPECT_EQ(a.warnings[0].tau, 10.0);
}

TEST(LogTaus, MultiplesOfGate) {
    const auto taus = log_taus(0.01, 1.0, 5);
    EXPECT_EQ(taus.front(), 0.01);
    EXPECT_NEAR(taus.back(), 1.0, 1e-12);
    for (double t : taus) EXPECT_NEAR(std::round(t / 0.01), t / 0.01, 1e-9);
}
