#pragma once

#include "laserlock/metrics.hpp"
#include "laserlock/noise.hpp"
#include "laserlock/optics.hpp"
#include "laserlock/servo.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace laserlock {

struct LineModel {
    std::string label;
    double fwhm_243 = 0.0;   ///< Lorentzian field FWHM of the driving light, Hz

    bool operator==(const LineModel&) const = default;
};

struct AnalysisConfig {
    std::vector<std::string> outputs{"psd", "field", "efficiency"};
    double bandwidth = 1.0e7;          ///< phase-noise integration span, Hz
    int n_photons = 8;

    Eigen::Index psd_segment_len = 16384;
    double psd_overlap = 0.5;

    double field_rbw = 1.0e4;
    int field_harmonic = 2;            ///< phase multiplier before the field spectrum

    double allan_duration = 400.0;     ///< s
    double allan_sample_rate = 1.0e3;  ///< Hz
    std::vector<double> allan_gates{0.01, 1.0};
    double allan_max_tau = 100.0;      ///< s
    double allan_beat_offset = 1.0e6;  ///< nominal beat frequency fed to the counter, Hz
    double allan_reference_drift = 0.0;///< drift of the second cavity, Hz/s
    bool allan_subtract_drift = false;
    double nu0 = 3.08e14;              ///< optical carrier for fractional normalization, Hz

    std::vector<LineModel> lineshape_lasers{{"ecdl", 2.0}, {"dye", 120.0}};
    double natural_width = 1.3;        ///< Hz
    double transit_width = 2.0e3;      ///< Hz
    double lineshape_span = 1.0e4;     ///< grid covers +-span, Hz
    int lineshape_points = 801;
    double lineshape_bin = 0.5;        ///< laser spectrum grid spacing, Hz

    bool export_traces = false;

    bool wants(const std::string& output) const;
    bool operator==(const AnalysisConfig&) const = default;
};

/// A fully validated simulation scenario. `defaulted` lists the dotted keys
/// that were absent from the file and took built-in defaults.
struct Scenario {
    std::string name = "scenario";
    NoiseSpec laser;
    EcdlGeometry geometry;
    CavityModel cavity;
    PdhConfig pdh;
    ServoConfig servo;
    AnalysisConfig analysis;
    std::vector<std::uint64_t> seeds{1};
    double duration = 0.004;           ///< lock simulation length, s

    std::vector<std::string> defaulted;

    /// Equality of the physical content, ignoring `defaulted`.
    bool operator==(const Scenario& other) const;
};

/// Parses and validates a scenario file (YAML: nested sections, units in key
/// names). Parse errors carry line and column; unknown keys are rejected.
Scenario load_scenario(const std::filesystem::path& path);

/// As load_scenario, from text. `origin` names the source in messages.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>",
                        const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Every field written explicitly; parse_scenario(dump_scenario(s)) == s.
std::string dump_scenario(const Scenario& s);

/// Keys whose values the modelled experiment leaves open (gains, actuator
/// coefficients, diode geometry, PDH parameters, cavity spacing).
const std::vector<std::string>& assumption_keys();

/// Beat of two independently drifting cavity-locked lasers at the thermal
/// floor, counted at every configured gate and reduced to Allan deviations.
std::vector<AllanResult> run_allan_pipeline(const Scenario& s, std::uint64_t seed);

struct RunOptions {
    std::filesystem::path out_root = "out";
    std::optional<std::uint64_t> seed;
    bool allow_unlock = false;
    std::optional<std::vector<std::string>> outputs;   ///< overrides analysis.outputs
};

struct RunSummary {
    std::string scenario;
    std::uint64_t seed = 0;
    bool lock_ran = false;
    double phi2_rms = 0.0;
    double bandwidth = 0.0;
    double carrier_fraction = 1.0;
    double efficiency = 1.0;
    int n_photons = 8;
    bool locked = false;
    std::uint64_t saturation_events = 0;
    double final_detuning = 0.0;
    std::filesystem::path directory;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitLockLost = 3;
inline constexpr int kExitIo = 4;

struct RunReport {
    int exit_status = kExitOk;
    std::vector<RunSummary> runs;
};

/// Runs every seed of the scenario into out_root/<name>/seed_<seed>/.
RunReport run_scenario(const Scenario& s, const RunOptions& options);

/// Single seed into an explicit directory.
RunSummary run_scenario_seed(const Scenario& s, std::uint64_t seed, const std::vector<std::string>& outputs,
                             const std::filesystem::path& dir);

std::string summary_header(int n_photons);
std::vector<std::string> summary_row(const RunSummary& r);

struct SweepAxis {
    std::string key;                   ///< dotted scenario key, e.g. servo.fast_gain
    std::vector<std::string> values;
};

/// Parses "key=v1,v2,..." into an axis.
SweepAxis parse_sweep_axis(const std::string& spec);

/// Cartesian grid over the axes; each (point, seed) runs in its own
/// directory out_root/<name>/point_<i>/seed_<s>/, using up to `jobs` threads.
/// Aggregated rows go to out_root/<name>/sweep.csv.
RunReport run_sweep(const std::filesystem::path& scenario_path, const std::vector<SweepAxis>& axes,
                    const RunOptions& options, unsigned jobs);

} // namespace laserlock
