#pragma once

#include "laserlock/metrics.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace laserlock {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Spectrum CSV:
///   # kind=<kind>,rbw_hz=<rbw>,bin_width_hz=<df>,averages=<n>,reference_power=<p>
///   freq_hz,psd
void write_spectrum_csv(const SpectrumEstimate& spectrum, const std::filesystem::path& path);

/// Allan CSV, one block of rows per result:
///   # nu0_hz=<nu0>
///   gate_s,tau_s,sigma_y,drift_subtracted
void write_allan_csv(const std::vector<AllanResult>& results, const std::filesystem::path& path);

/// Line profiles: `detuning_hz,amplitude` for a single profile, otherwise
/// one `amplitude_<label>` column per profile.
void write_lineshape_csv(const Eigen::VectorXd& grid,
                         const std::vector<std::pair<std::string, Eigen::VectorXd>>& profiles,
                         const std::filesystem::path& path);

/// Writes `header` followed by `rows`, each already formatted.
void write_rows(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::vector<std::string>>& rows);

} // namespace laserlock
