#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace laserlock {

/// Uniformly sampled optical phase deviation in radians.
///
/// Sample n sits at time t0 + n / sample_rate; the trace spans
/// (size() - 1) / sample_rate seconds. Immutable after construction.
class PhaseTrace {
public:
    PhaseTrace(double sample_rate, Eigen::VectorXd samples, double t0 = 0.0, std::string label = {});

    double sample_rate() const noexcept { return sample_rate_; }
    double dt() const noexcept { return 1.0 / sample_rate_; }
    double t0() const noexcept { return t0_; }
    const std::string& label() const noexcept { return label_; }
    const Eigen::VectorXd& samples() const noexcept { return samples_; }
    Eigen::Index size() const noexcept { return samples_.size(); }
    double duration() const noexcept { return static_cast<double>(samples_.size() - 1) / sample_rate_; }
    double time(Eigen::Index n) const noexcept { return t0_ + static_cast<double>(n) / sample_rate_; }

    /// Instantaneous frequency (Hz) per sample interval, size() - 1 values.
    Eigen::VectorXd frequency() const;

    /// Population variance of the samples.
    double variance() const;

    PhaseTrace with_samples(Eigen::VectorXd samples) const;
    PhaseTrace with_label(std::string label) const;

private:
    double sample_rate_;
    Eigen::VectorXd samples_;
    double t0_;
    std::string label_;
};

/// CSV with header `time_s,phase_rad`.
void write_trace_csv(const PhaseTrace& trace, const std::filesystem::path& path);
PhaseTrace read_trace_csv(const std::filesystem::path& path);

/// Little-endian binary frame:
///   magic   "LLPT" (4 bytes)
///   version u32 = 1
///   fs      f64
///   t0      f64
///   n       u64
///   payload n x f64
inline constexpr char kTraceMagic[4] = {'L', 'L', 'P', 'T'};
inline constexpr std::uint32_t kTraceVersion = 1;

void write_trace_binary(const PhaseTrace& trace, const std::filesystem::path& path);
PhaseTrace read_trace_binary(const std::filesystem::path& path);

} // namespace laserlock
