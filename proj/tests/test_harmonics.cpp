#include "laserlock/errors.hpp"
#include "laserlock/harmonics.hpp"
#include "laserlock/metrics.hpp"
#include "laserlock/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace laserlock;

namespace {

constexpr double kPi = std::numbers::pi;

SpectrumEstimate flat_phase_spectrum(double level, double span, double df) {
    const auto n = static_cast<Eigen::Index>(std::llround(span / df)) + 1;
    SpectrumEstimate s;
    s.kind = SpectrumKind::phase;
    s.bin_width = df;
    s.rbw = df;
    s.freqs = Eigen::VectorXd::LinSpaced(n, 0.0, span);
    s.psd = Eigen::VectorXd::Constant(n, level);
    return s;
}

double lorentzian(double f, double fwhm) { return 1.0 / (1.0 + std::pow(2.0 * f / fwhm, 2)); }

} // namespace

TEST(MultiplyPhase, IdentityAndScaling) {
    const auto t = generate_phase(NoiseSpec::white_fm(10, 1, 5e3), 1.0, 1e4, 9);
    const auto one = multiply_phase(t, 1);
    EXPECT_TRUE((one.samples().array() == t.samples().array()).all());
    const auto eight = multiply_phase(t, 8);
    EXPECT_NEAR(eight.variance() / t.variance(), 64.0, 1e-9);
    EXPECT_THROW(multiply_phase(t, 0), ValidationError);
}

TEST(MultiplyPhase, CommutesWithDrift) {
    const auto t = generate_phase(NoiseSpec::white_fm(10, 1, 5e3), 1.0, 1e4, 9);
    const auto a = multiply_phase(add_drift(t, 0.7), 3);
    const auto b = add_drift(multiply_phase(t, 3), 2.1);
    EXPECT_LT((a.samples() - b.samples()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MultiplyPhase, SecondHarmonicQuadruplesLinewidth) {
    const auto spec = NoiseSpec::white_fm(white_fm_level(100.0), 0.1, 1e4);
    double w1 = 0.0, w2 = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto t = generate_phase(spec, 20.0, 2e4, seed);
        w1 += fit_lorentzian_fwhm(field_spectrum(t, 5.0));
        w2 += fit_lorentzian_fwhm(field_spectrum(multiply_phase(t, 2), 5.0));
    }
    EXPECT_GE(w2 / w1, 3.5);
    EXPECT_LE(w2 / w1, 4.5);
}

TEST(CarrierFraction, Values) {
    EXPECT_EQ(carrier_fraction(0.0), 1.0);
    EXPECT_NEAR(carrier_fraction(1e-3), 0.9990, 5e-5);
    EXPECT_NEAR(carrier_fraction(13e-3), 0.9871, 5e-5);
    EXPECT_THROW(carrier_fraction(-1.0), ValidationError);
}

TEST(CarrierFraction, BoundedAndStrictlyDecreasing) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng);
        const double b = a + 1e-6 + u(rng);
        EXPECT_LE(carrier_fraction(a), 1.0);
        EXPECT_LT(carrier_fraction(b), carrier_fraction(a));
    }
}

TEST(ExcitationEfficiency, Values) {
    EXPECT_NEAR(excitation_efficiency(1e-3, 8), 0.938, 0.001);
    EXPECT_NEAR(excitation_efficiency(13e-3, 8), 0.435, 0.001);
    for (int n = 1; n <= 10; ++n) EXPECT_EQ(excitation_efficiency(0.0, n), 1.0);
    EXPECT_THROW(excitation_efficiency(1e-3, 0), ValidationError);
}

TEST(ExcitationEfficiency, IsCarrierFractionOfScaledVariance) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 0.1);
    std::uniform_int_distribution<int> n(1, 12);
    for (int i = 0; i < 1000; ++i) {
        const double phi2 = u(rng);
        const int k = n(rng);
        EXPECT_EQ(excitation_efficiency(phi2, k), carrier_fraction(static_cast<double>(k * k) * phi2));
    }
}

TEST(ExcitationEfficiency, ArrayFormMatchesScalar) {
    Eigen::ArrayXd phi2 = Eigen::ArrayXd::LinSpaced(11, 0.0, 0.02);
    const Eigen::ArrayXd eta = excitation_efficiency(phi2, 8);
    const Eigen::ArrayXd cf = carrier_fraction(phi2);
    for (Eigen::Index i = 0; i < phi2.size(); ++i) {
        EXPECT_DOUBLE_EQ(eta[i], excitation_efficiency(phi2[i], 8));
        EXPECT_DOUBLE_EQ(cf[i], carrier_fraction(phi2[i]));
    }
}

TEST(RmsPhaseInBandwidth, FlatPedestal) {
    const auto s = flat_phase_spectrum(1e-10, 2e7, 1e3);
    EXPECT_NEAR(rms_phase_in_bandwidth(s, 1e7), 1e-3, 1e-9);
    EXPECT_NEAR(rms_phase_in_bandwidth(s, 1e7, Sideband::both), 2e-3, 1e-9);
    const auto zero = flat_phase_spectrum(0.0, 2e7, 1e3);
    EXPECT_EQ(rms_phase_in_bandwidth(zero, 1e7), 0.0);
}

TEST(RmsPhaseInBandwidth, RejectsCoarseResolution) {
    const auto s = flat_phase_spectrum(1e-10, 2e7, 2e5);
    EXPECT_THROW(rms_phase_in_bandwidth(s, 1e7), ValidationError);
}

TEST(RmsPhaseInBandwidth, AgreesWithTimeDomainVariance) {
    // white phase noise with total variance 1e-3 rad^2 over a band well below Nyquist
    NoiseSpec spec;
    const double fs = 1e6;
    const double band = 1e5;
    spec.set_coefficient(2, 1e-3 / band);
    spec.f_low = 1.0;
    spec.f_high = band;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto t = generate_phase(spec, 0.5, fs, seed);
        const auto psd = estimate_psd(t, 4096, 0.5, SpectrumKind::phase);
        const double phi2 = rms_phase_in_bandwidth(psd, 5e5);
        EXPECT_NEAR(phi2 / t.variance(), 1.0, 0.1);
        EXPECT_NEAR(phi2 / 1e-3, 1.0, 0.1);
        const auto m = phase_metrics(psd, 5e5);
        EXPECT_DOUBLE_EQ(m.phi2_rms, phi2);
        EXPECT_DOUBLE_EQ(m.carrier_fraction, carrier_fraction(phi2));
    }
}

TEST(ExcitationSpectrum, MonochromaticDriveGivesAtomicLorentzian) {
    const auto laser = lorentzian_field_spectrum(0.0, 1.0, 100.0);
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(401, -2000.0, 2000.0);
    const auto profile = excitation_spectrum(laser, 100.0, 200.0, grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) EXPECT_NEAR(profile[i], lorentzian(grid[i], 300.0), 1e-9);
}

TEST(ExcitationSpectrum, LorentzianDriveAddsWidths) {
    // a 50 Hz field FWHM at the drive frequency self-convolves to 100 Hz
    const auto laser = lorentzian_field_spectrum(50.0, 0.5, 5000.0);
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(4001, -4000.0, 4000.0);
    const auto profile = excitation_spectrum(laser, 0.0, 1000.0, grid);
    EXPECT_NEAR(profile_width(grid, profile, 0.5) / 1100.0, 1.0, 0.05);
}

TEST(ExcitationSpectrum, BroaderDriveIsBroaderAtEveryLevel) {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(801, -1e4, 1e4);
    const auto narrow = excitation_spectrum(lorentzian_field_spectrum(2.0, 0.5, 200.0), 1.3, 2e3, grid);
    const auto broad = excitation_spectrum(lorentzian_field_spectrum(120.0, 0.5, 1e4), 1.3, 2e3, grid);
    for (double level = 0.05; level <= 0.5 + 1e-12; level += 0.05)
        EXPECT_GT(profile_width(grid, broad, level), profile_width(grid, narrow, level)) << level;
}

TEST(ProfileWidth, AnalyticLorentzian) {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(20001, -1000.0, 1000.0);
    const Eigen::VectorXd p = grid.unaryExpr([](double f) { return lorentzian(f, 40.0); });
    EXPECT_NEAR(profile_width(grid, p, 0.5), 40.0, 1e-3);
    EXPECT_NEAR(profile_width(grid, p, 0.2), 80.0, 1e-2);
}
