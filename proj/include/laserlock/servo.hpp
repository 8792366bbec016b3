#pragma once

#include "laserlock/noise.hpp"
#include "laserlock/optics.hpp"
#include "laserlock/trace.hpp"

#include <complex>
#include <cstdint>
#include <optional>

namespace laserlock {

/// Three-branch frequency servo: a fast proportional path to one EOM
/// electrode, a PI controller (PI1) driving the second electrode through a
/// high-voltage amplifier, and a pure integrator (PI2) that moves the grating
/// PZT so that PI1's output relaxes back to zero.
///
/// Gains are normalized: the controllers see the detuning estimate
/// error / design_slope in Hz and produce frequency corrections in Hz, so the
/// electronic gain of a branch is gain / (design_slope * actuator). Ranges
/// are in volts on the respective actuator.
struct ServoConfig {
    double fast_gain = 4.0;            ///< proportional loop gain, dimensionless
    double fast_bw = 3.0e6;            ///< single-pole corner, Hz
    double fast_actuator = 1.0e6;      ///< EOM electrode 1, Hz/V
    double fast_range = 5.0;           ///< +-V

    double pi1_kp = 0.0;               ///< dimensionless
    double pi1_ki = 2.0e7;             ///< 1/s
    double hv_actuator = 1.0e6;        ///< EOM electrode 2 via HV amplifier, Hz/V
    double hv_range = 200.0;           ///< +-V

    bool pi2_enabled = true;
    double pi2_tau = 1.0;              ///< s, integrator time constant
    double pzt_actuator = 1.0e7;       ///< Hz/V
    double pzt_range = 100.0;          ///< +-V
    double pzt_bw = 1.0e3;             ///< Hz, single pole

    double sim_rate = 1.0e8;           ///< loop update rate, Hz
    double initial_detuning = 0.0;     ///< laser minus cavity at t = 0, Hz
    bool nonlinear_pdh = false;        ///< use the full discriminator instead of slope * detuning
    double design_slope = 0.0;         ///< V/Hz the gains were designed for; 0 means "as built"

    bool operator==(const ServoConfig&) const = default;
};

void validate(const ServoConfig& servo);

/// Complete loop state after a step. Controller outputs are stored as
/// frequency corrections (Hz) before the loop sign is applied.
struct LoopState {
    std::uint64_t step = 0;
    double time = 0.0;
    double free_phase = 0.0;
    double correction_phase = 0.0;
    double cavity_phase = 0.0;
    double residual = 0.0;
    double detuning = 0.0;           ///< average laser-cavity detuning over the last step, Hz

    double input_prev = 0.0;         ///< controller input at the previous step, Hz
    double fast_out = 0.0;
    double pi1_integral = 0.0;
    double pi1_out = 0.0;
    double pi2_integral = 0.0;
    double pzt_state = 0.0;
    double pzt_out = 0.0;

    bool fast_saturated = false;
    bool hv_saturated = false;
    bool pzt_saturated = false;
    std::uint64_t saturation_events = 0;

    /// Frequency correction applied during the next step, Hz.
    double correction() const { return -(fast_out + pi1_out + pzt_out); }

    bool operator==(const LoopState&) const = default;
};

class ServoLoop {
public:
    ServoLoop(const ServoConfig& servo, const CavityModel& cavity, const PdhConfig& pdh);

    LoopState initial_state() const { return {}; }

    /// One loop update of length dt (must equal 1 / sim_rate): detuning ->
    /// discriminator -> three branches -> clamped actuator corrections.
    /// Throws SimulationError on a non-finite state.
    LoopState step(const LoopState& state, double free_run_phase_increment, double dt) const;

    /// As step(), with the free-running phase after the step given exactly.
    LoopState advance(const LoopState& state, double free_run_phase_increment, double next_free_phase) const;

    double fast_volts(const LoopState& s) const { return s.fast_out / servo_.fast_actuator; }
    double hv_volts(const LoopState& s) const { return s.pi1_out / servo_.hv_actuator; }
    double pzt_volts(const LoopState& s) const { return s.pzt_out / servo_.pzt_actuator; }

    const ServoConfig& config() const noexcept { return servo_; }
    double slope() const noexcept { return slope_; }
    double design_slope() const noexcept { return design_slope_; }

private:
    ServoConfig servo_;
    CavityModel cavity_;
    PdhConfig pdh_;
    double slope_;
    double design_slope_;
    double dt_;
    double fast_a_;
    double fast_b_;
    double pzt_a_;
    double pzt_b_;
    double fast_limit_;
    double hv_limit_;
    double pzt_limit_;
};

struct ActuatorTraces {
    Eigen::VectorXd fast;   ///< V
    Eigen::VectorXd hv;     ///< V
    Eigen::VectorXd pzt;    ///< V
};

struct LockResult {
    PhaseTrace residual;               ///< in-loop phase error, rad, at sim_rate
    PhaseTrace free_run;               ///< the synthesized free-running phase
    ActuatorTraces actuators;
    bool locked = false;
    std::optional<std::uint64_t> lost_at_step;
    std::uint64_t saturation_events = 0;
    double final_detuning = 0.0;       ///< mean detuning over the final 10 % of the run, Hz
    double pi1_final_mean = 0.0;       ///< mean HV command over the final 10 %, V
    double hv_range = 0.0;
};

/// Closed-loop run of a free-running laser (synthesized from `laser` at
/// sim_rate) against a drifting cavity. Lock is declared lost when the fast
/// and HV branches are both saturated for longer than 10 us (at least 10
/// steps); `locked` additionally requires |final_detuning| < linewidth / 10.
LockResult run_lock(const NoiseSpec& laser, const CavityModel& cavity, const PdhConfig& pdh,
                    const ServoConfig& servo, double duration, std::uint64_t seed);

/// Open-loop transfer function G(f) of the discretized loop, including the
/// one-step actuator latency. `slope` is the discriminator slope seen by the
/// loop; gains scale by slope / design_slope.
std::complex<double> loop_gain(const ServoConfig& servo, double slope, double f);

/// |1 + G(f)|.
double closed_loop_suppression(const ServoConfig& servo, double pdh_slope_value, double f);

} // namespace laserlock
