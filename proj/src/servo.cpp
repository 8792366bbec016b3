#include "laserlock/servo.hpp"

#include "laserlock/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace laserlock {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

// Bilinear single pole, y[n] = a y[n-1] + b (x[n] + x[n-1]) with unity DC gain.
struct PoleCoefficients {
    double a;
    double b;
};

PoleCoefficients bilinear_pole(double corner_hz, double dt) {
    const double w = kTwoPi * corner_hz;
    const double k = 2.0 / dt;
    return {(k - w) / (k + w), w / (k + w)};
}

double clamp_to(double value, double limit, bool& saturated) {
    saturated = std::abs(value) > limit;
    return saturated ? std::copysign(limit, value) : value;
}

} // namespace

void validate(const ServoConfig& s) {
    using detail::require;
    require(std::isfinite(s.fast_gain), "servo.fast_gain", "must be finite");
    require(finite_positive(s.fast_bw), "servo.fast_bw_hz", "must be > 0");
    require(finite_positive(s.fast_actuator), "servo.fast_actuator_hz_per_v", "must be > 0");
    require(std::isfinite(s.fast_range) && s.fast_range >= 0.0, "servo.fast_range_v", "must be >= 0");
    require(std::isfinite(s.pi1_kp), "servo.pi1_kp", "must be finite");
    require(std::isfinite(s.pi1_ki), "servo.pi1_ki_per_s", "must be finite");
    require(finite_positive(s.hv_actuator), "servo.hv_actuator_hz_per_v", "must be > 0");
    require(std::isfinite(s.hv_range) && s.hv_range >= 0.0, "servo.hv_range_v", "must be >= 0");
    require(finite_positive(s.pi2_tau), "servo.pi2_tau_s", "must be > 0");
    require(finite_positive(s.pzt_actuator), "servo.pzt_actuator_hz_per_v", "must be > 0");
    require(std::isfinite(s.pzt_range) && s.pzt_range >= 0.0, "servo.pzt_range_v", "must be >= 0");
    require(finite_positive(s.pzt_bw), "servo.pzt_bw_hz", "must be > 0");
    require(finite_positive(s.sim_rate), "servo.sim_rate_hz", "must be > 0");
    require(s.sim_rate >= 20.0 * s.fast_bw, "servo.sim_rate_hz", "must be at least 20 x fast_bw_hz");
    require(std::isfinite(s.initial_detuning), "servo.initial_detuning_hz", "must be finite");
    require(std::isfinite(s.design_slope), "servo.design_slope_v_per_hz", "must be finite");
}

ServoLoop::ServoLoop(const ServoConfig& servo, const CavityModel& cavity, const PdhConfig& pdh)
    : servo_(servo), cavity_(cavity), pdh_(pdh) {
    validate(servo_);
    validate(cavity_);
    validate(pdh_, cavity_);
    slope_ = pdh_slope(pdh_, cavity_);
    detail::require(slope_ != 0.0 && std::isfinite(slope_), "pdh", "discriminator slope is zero");
    design_slope_ = servo_.design_slope != 0.0 ? servo_.design_slope : slope_;
    dt_ = 1.0 / servo_.sim_rate;
    const auto fast = bilinear_pole(servo_.fast_bw, dt_);
    fast_a_ = fast.a;
    fast_b_ = fast.b * servo_.fast_gain;
    const auto pzt = bilinear_pole(servo_.pzt_bw, dt_);
    pzt_a_ = pzt.a;
    pzt_b_ = pzt.b;
    fast_limit_ = servo_.fast_range * servo_.fast_actuator;
    hv_limit_ = servo_.hv_range * servo_.hv_actuator;
    pzt_limit_ = servo_.pzt_range * servo_.pzt_actuator;
}

LoopState ServoLoop::step(const LoopState& state, double free_run_phase_increment, double dt) const {
    if (!(std::abs(dt * servo_.sim_rate - 1.0) < 1e-9))
        throw ValidationError("servo.sim_rate_hz", "step dt must equal 1 / sim_rate");
    return advance(state, free_run_phase_increment, state.free_phase + free_run_phase_increment);
}

LoopState ServoLoop::advance(const LoopState& s, double free_run_phase_increment, double next_free_phase) const {
    LoopState n = s;
    const double t_mid = s.time + 0.5 * dt_;
    const double correction = s.correction();
    const double cavity_offset = cavity_.drift_rate * t_mid - servo_.initial_detuning;

    n.detuning = free_run_phase_increment / (kTwoPi * dt_) + correction - cavity_offset;
    n.free_phase = next_free_phase;
    n.correction_phase = s.correction_phase + kTwoPi * dt_ * correction;
    n.cavity_phase = s.cavity_phase + kTwoPi * dt_ * cavity_offset;
    n.residual = n.free_phase + n.correction_phase - n.cavity_phase;
    n.step = s.step + 1;
    n.time = static_cast<double>(n.step) * dt_;

    const double error = servo_.nonlinear_pdh ? pdh_error(n.detuning, pdh_, cavity_) : slope_ * n.detuning;
    const double x = error / design_slope_;
    const double x_sum = x + s.input_prev;
    n.input_prev = x;

    // fast proportional path
    const double fast_raw = fast_a_ * s.fast_out + fast_b_ * x_sum;
    n.fast_out = clamp_to(fast_raw, fast_limit_, n.fast_saturated);

    // PI1, conditional integration when clamped
    const double integral = s.pi1_integral + servo_.pi1_ki * 0.5 * dt_ * x_sum;
    n.pi1_out = clamp_to(servo_.pi1_kp * x + integral, hv_limit_, n.hv_saturated);
    n.pi1_integral = n.hv_saturated ? s.pi1_integral : integral;

    // PI2 integrates PI1's output and steers the PZT through its pole
    if (servo_.pi2_enabled) {
        const double i2 = s.pi2_integral + 0.5 * dt_ / servo_.pi2_tau * (n.pi1_out + s.pi1_out);
        const double pzt_raw = pzt_a_ * s.pzt_state + pzt_b_ * (i2 + s.pi2_integral);
        n.pzt_out = clamp_to(pzt_raw, pzt_limit_, n.pzt_saturated);
        if (n.pzt_saturated) {
            n.pi2_integral = s.pi2_integral;
            n.pzt_state = n.pzt_out;
        } else {
            n.pi2_integral = i2;
            n.pzt_state = pzt_raw;
        }
    }

    n.saturation_events += static_cast<std::uint64_t>(n.fast_saturated && !s.fast_saturated) +
                           static_cast<std::uint64_t>(n.hv_saturated && !s.hv_saturated) +
                           static_cast<std::uint64_t>(n.pzt_saturated && !s.pzt_saturated);

    if (!std::isfinite(n.residual) || !std::isfinite(n.fast_out) || !std::isfinite(n.pi1_out) ||
        !std::isfinite(n.pzt_out) || !std::isfinite(n.pi2_integral))
        throw SimulationError("servo state became non-finite at step " + std::to_string(n.step) +
                              " (detuning " + std::to_string(n.detuning) + " Hz)");
    return n;
}

LockResult run_lock(const NoiseSpec& laser, const CavityModel& cavity, const PdhConfig& pdh,
                    const ServoConfig& servo, double duration, std::uint64_t seed) {
    validate(servo);
    detail::require(std::isfinite(duration) && duration * servo.sim_rate >= 1.0e4, "duration_s",
                    "run must contain at least 1e4 loop steps");
    const ServoLoop loop(servo, cavity, pdh);
    PhaseTrace free_run = generate_phase(laser, duration, servo.sim_rate, seed);
    const Eigen::VectorXd& phi = free_run.samples();
    const Eigen::Index n = phi.size();

    Eigen::VectorXd residual = Eigen::VectorXd::Zero(n);
    ActuatorTraces act{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    residual[0] = phi[0];

    const auto holdoff = std::max<std::uint64_t>(10, static_cast<std::uint64_t>(std::llround(servo.sim_rate * 1e-5)));
    const Eigen::Index tail_start = n - std::max<Eigen::Index>(1, (n - 1) / 10);
    double detuning_sum = 0.0;
    Eigen::Index detuning_count = 0;

    LockResult result{free_run.with_samples(residual), free_run, {}, false, std::nullopt, 0, 0.0, 0.0,
                      servo.hv_range};
    std::uint64_t both_saturated = 0;

    LoopState state = loop.initial_state();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        state = loop.advance(state, phi[i + 1] - phi[i], phi[i + 1]);
        residual[i + 1] = state.residual;
        act.fast[i + 1] = loop.fast_volts(state);
        act.hv[i + 1] = loop.hv_volts(state);
        act.pzt[i + 1] = loop.pzt_volts(state);
        if (i + 1 >= tail_start) {
            detuning_sum += state.detuning;
            ++detuning_count;
        }
        both_saturated = (state.fast_saturated && state.hv_saturated) ? both_saturated + 1 : 0;
        if (both_saturated >= holdoff && !result.lost_at_step) result.lost_at_step = state.step;
    }

    result.residual = PhaseTrace(servo.sim_rate, std::move(residual), 0.0, "residual");
    result.saturation_events = state.saturation_events;
    result.final_detuning = detuning_sum / static_cast<double>(std::max<Eigen::Index>(1, detuning_count));
    result.pi1_final_mean = act.hv.tail(n - tail_start).mean();
    result.actuators = std::move(act);
    result.locked = !result.lost_at_step && std::abs(result.final_detuning) < cavity.linewidth / 10.0;
    return result;
}

std::complex<double> loop_gain(const ServoConfig& servo, double slope, double f) {
    validate(servo);
    using cplx = std::complex<double>;
    const double dt = 1.0 / servo.sim_rate;
    const double ratio = servo.design_slope != 0.0 ? slope / servo.design_slope : 1.0;
    const cplx zi = std::polar(1.0, -kTwoPi * f * dt);
    const cplx integrator = 0.5 * dt * (1.0 + zi) / (1.0 - zi);
    const auto fast = bilinear_pole(servo.fast_bw, dt);
    const auto pzt = bilinear_pole(servo.pzt_bw, dt);
    const cplx h_fast = servo.fast_gain * fast.b * (1.0 + zi) / (1.0 - fast.a * zi);
    const cplx h_pi1 = servo.pi1_kp + servo.pi1_ki * integrator;
    cplx h_slow = 1.0;
    if (servo.pi2_enabled) {
        const cplx h_pzt = pzt.b * (1.0 + zi) / (1.0 - pzt.a * zi);
        h_slow += integrator / servo.pi2_tau * h_pzt;
    }
    return ratio * zi * (h_fast + h_pi1 * h_slow);
}

double closed_loop_suppression(const ServoConfig& servo, double pdh_slope_value, double f) {
    detail::require(std::isfinite(f) && f > 0.0, "f", "must be > 0");
    return std::abs(1.0 + loop_gain(servo, pdh_slope_value, f));
}

} // namespace laserlock
