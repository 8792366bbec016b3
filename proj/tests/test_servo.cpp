#include "laserlock/errors.hpp"
#include "laserlock/metrics.hpp"
#include "laserlock/noise.hpp"
#include "laserlock/servo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace laserlock;

namespace {

constexpr double kPi = std::numbers::pi;

ServoConfig open_loop() {
    ServoConfig s;
    s.fast_gain = 0.0;
    s.pi1_kp = 0.0;
    s.pi1_ki = 0.0;
    s.pi2_enabled = false;
    return s;
}

// Continuous-time model of the same topology with one sample of latency.
std::complex<double> continuous_gain(const ServoConfig& s, double f) {
    const std::complex<double> jw(0.0, 2.0 * kPi * f);
    const auto fast = s.fast_gain / (1.0 + jw / (2.0 * kPi * s.fast_bw));
    const auto pi1 = s.pi1_kp + s.pi1_ki / jw;
    std::complex<double> slow = 1.0;
    if (s.pi2_enabled) slow += 1.0 / (s.pi2_tau * jw) / (1.0 + jw / (2.0 * kPi * s.pzt_bw));
    return std::exp(-jw / s.sim_rate) * (fast + pi1 * slow);
}

} // namespace

TEST(ServoLoop, SilentInputIsAFixedPoint) {
    const ServoConfig cfg;
    const ServoLoop loop(cfg, CavityModel{}, PdhConfig{});
    LoopState s = loop.initial_state();
    for (int i = 0; i < 100; ++i) s = loop.step(s, 0.0, 1.0 / cfg.sim_rate);
    LoopState expected = loop.initial_state();
    expected.step = s.step;
    expected.time = s.time;
    EXPECT_EQ(s, expected);
}

TEST(ServoLoop, StepRejectsForeignTimeStep) {
    const ServoLoop loop(ServoConfig{}, CavityModel{}, PdhConfig{});
    EXPECT_THROW(loop.step(loop.initial_state(), 0.0, 1e-6), ValidationError);
}

TEST(ServoLoop, OpenLoopPassesFreeRunningPhaseExactly) {
    const auto laser = NoiseSpec::white_fm(6366.2, 10.0, 5e7);
    const auto r = run_lock(laser, CavityModel{}, PdhConfig{}, open_loop(), 2e-4, 11);
    const auto synth = generate_phase(laser, 2e-4, 1e8, 11);
    ASSERT_EQ(r.residual.size(), synth.size());
    EXPECT_TRUE((r.residual.samples().array() == synth.samples().array()).all());
    EXPECT_TRUE((r.free_run.samples().array() == synth.samples().array()).all());
}

TEST(ServoLoop, IntegratorStepResponseTimeConstant) {
    // PI1 alone is a pure integrator: G = ki / s, unity gain at ki / 2 pi,
    // closed-loop error decays as exp(-t ki).
    ServoConfig cfg = open_loop();
    cfg.pi1_ki = 2.0 * kPi * 1e3;
    cfg.fast_bw = 1e4;
    cfg.sim_rate = 1e6;
    cfg.initial_detuning = 100.0;
    const ServoLoop loop(cfg, CavityModel{}, PdhConfig{});
    LoopState s = loop.initial_state();
    double t_e = -1.0;
    for (int i = 0; i < 10000 && t_e < 0.0; ++i) {
        s = loop.step(s, 0.0, 1.0 / cfg.sim_rate);
        if (std::abs(s.detuning) <= 100.0 / std::numbers::e) t_e = s.time;
    }
    const double tau = 1.0 / (2.0 * kPi * 1e3);
    EXPECT_NEAR(t_e / tau, 1.0, 0.2);
}

TEST(ServoLoop, NonlinearDiscriminatorCapturesWithinLinewidth) {
    // static discriminator: the laser must be quiet on the cavity storage time
    const CavityModel cavity;
    for (double start : {-0.45, 0.2, 0.45}) {
        ServoConfig cfg;
        cfg.nonlinear_pdh = true;
        cfg.initial_detuning = start * cavity.linewidth;
        const auto r = run_lock(NoiseSpec::white_fm(1.0, 10.0, 5e7), cavity, PdhConfig{}, cfg, 4e-4, 2);
        EXPECT_TRUE(r.locked) << start;
        EXPECT_LT(std::abs(r.final_detuning), 100.0) << start;
    }
}

TEST(RunLock, DisabledHighVoltageBranchCannotHoldLock) {
    NoiseSpec quiet;
    quiet.f_high = 5e7;
    ServoConfig cfg;
    cfg.hv_range = 0.0;
    cfg.initial_detuning = 1e6;
    const auto r = run_lock(quiet, CavityModel{}, PdhConfig{}, cfg, 1e-4, 1);
    EXPECT_FALSE(r.locked);
    EXPECT_GT(r.saturation_events, 0u);

    cfg.initial_detuning = 2e7;
    const auto lost = run_lock(quiet, CavityModel{}, PdhConfig{}, cfg, 1e-4, 1);
    EXPECT_FALSE(lost.locked);
    EXPECT_TRUE(lost.lost_at_step.has_value());
}

TEST(RunLock, RejectsShortRuns) {
    EXPECT_THROW(run_lock(NoiseSpec{}, CavityModel{}, PdhConfig{}, ServoConfig{}, 1e-5, 1), ValidationError);
}

TEST(RunLock, TracksDriftingCavityWithPiezoRamp) {
    NoiseSpec quiet;
    quiet.f_low = 0.01;
    quiet.f_high = 5e3;
    CavityModel cav;
    cav.drift_rate = 0.05;
    ServoConfig cfg;
    cfg.fast_bw = 500.0;
    cfg.pi1_ki = 2e3;
    cfg.pzt_bw = 100.0;
    cfg.sim_rate = 1e4;
    const double duration = 200.0;
    const auto r = run_lock(quiet, cav, PdhConfig{}, cfg, duration, 7);
    EXPECT_TRUE(r.locked);
    const double rms = std::sqrt(r.residual.samples().squaredNorm() / static_cast<double>(r.residual.size()));
    EXPECT_LT(rms, 1e-3);
    // type-2 loop: constant phase lag 2 pi R tau / ki
    EXPECT_NEAR(r.residual.samples().tail(1000).mean(), -2.0 * kPi * 0.05 * cfg.pi2_tau / cfg.pi1_ki, 2e-5);
    // the piezo carries the ramp, PI1 returns to mid-range
    const double ramp = cav.drift_rate * duration / cfg.pzt_actuator;
    EXPECT_NEAR(std::abs(r.actuators.pzt[r.actuators.pzt.size() - 1]) / ramp, 1.0, 0.05);
    EXPECT_LT(std::abs(r.pi1_final_mean), 0.05 * cfg.hv_range);
}

TEST(LoopGain, MatchesContinuousModelWellBelowNyquist) {
    ServoConfig cfg;
    cfg.pi1_kp = 0.5;
    for (double f = 10.0; f <= 1e6; f *= 3.7) {
        const auto d = loop_gain(cfg, 1.0, f);
        const auto c = continuous_gain(cfg, f);
        EXPECT_LT(std::abs(d - c) / std::abs(c), 1e-2) << f;
    }
}

TEST(LoopGain, DesignSlopeMismatchScalesGain) {
    ServoConfig cfg;
    cfg.design_slope = -2e-4;
    const auto g = loop_gain(cfg, -1e-4, 1e4);
    cfg.design_slope = 0.0;
    const auto ref = loop_gain(cfg, -1e-4, 1e4);
    EXPECT_NEAR(std::abs(g / ref), 0.5, 1e-12);
}

TEST(ClosedLoopSuppression, VanishesAboveBandwidth) {
    ServoConfig cfg;
    cfg.fast_bw = 1e4;
    cfg.pi1_ki = 1e3;
    EXPECT_NEAR(closed_loop_suppression(cfg, 1.0, 1e7), 1.0, 0.01);
}

TEST(ClosedLoopSuppression, GrowsWithoutBoundAtLowFrequency) {
    const ServoConfig cfg;
    double prev = closed_loop_suppression(cfg, 1.0, 1e3);
    for (double f = 1e2; f >= 1e-3; f /= 10.0) {
        const double s = closed_loop_suppression(cfg, 1.0, f);
        EXPECT_GT(s / prev, 9.0) << f;
        prev = s;
    }
}

TEST(ClosedLoopSuppression, MonteCarloResidualFollowsAnalyticLaw) {
    // reduced-rate loop so the run stays short
    ServoConfig cfg;
    cfg.sim_rate = 1e7;
    cfg.fast_bw = 3e5;
    cfg.pi1_ki = 2e6;
    const auto laser = NoiseSpec::white_fm(6366.2, 10.0, 5e6);
    const auto r = run_lock(laser, CavityModel{}, PdhConfig{}, cfg, 0.1, 5);
    ASSERT_TRUE(r.locked);
    const auto res = estimate_psd(r.residual, 1 << 16, 0.5, SpectrumKind::frequency);
    const auto free = estimate_psd(r.free_run, 1 << 16, 0.5, SpectrumKind::frequency);
    const double slope = pdh_slope(PdhConfig{}, CavityModel{});

    double peak = 0.0;
    for (double f = 1e3; f < 4e6; f *= 1.01) peak = std::max(peak, std::pow(closed_loop_suppression(cfg, slope, f), -2));

    for (double lo = 1e3; lo < 1e6; lo *= std::pow(10.0, 0.1)) {
        const double hi = lo * std::pow(10.0, 0.1);
        double measured = 0.0, analytic = 0.0;
        int n = 0;
        for (Eigen::Index k = 1; k < res.freqs.size(); ++k) {
            const double f = res.freqs[k];
            if (f < lo || f >= hi) continue;
            measured += res.psd[k] / free.psd[k];
            analytic += std::pow(closed_loop_suppression(cfg, slope, f), -2);
            ++n;
        }
        if (n == 0) continue;
        const double ratio = measured / analytic;
        EXPECT_GT(ratio, 0.5) << lo;
        EXPECT_LT(ratio, 2.0) << lo;
        EXPECT_LT(measured / n, peak * 2.0) << lo;
    }
}
