#include "laserlock/trace.hpp"

#include "laserlock/csv.hpp"
#include "laserlock/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace laserlock {

PhaseTrace::PhaseTrace(double sample_rate, Eigen::VectorXd samples, double t0, std::string label)
    : sample_rate_(sample_rate), samples_(std::move(samples)), t0_(t0), label_(std::move(label)) {
    detail::require(std::isfinite(sample_rate_) && sample_rate_ > 0.0, "trace.sample_rate",
                    "must be finite and > 0");
    detail::require(samples_.size() > 0, "trace.samples", "must be non-empty");
    detail::require(samples_.allFinite(), "trace.samples", "all values must be finite");
    detail::require(std::isfinite(t0_), "trace.t0", "must be finite");
}

Eigen::VectorXd PhaseTrace::frequency() const {
    const Eigen::Index n = samples_.size() - 1;
    if (n < 1) return Eigen::VectorXd();
    const double scale = sample_rate_ / (2.0 * std::numbers::pi);
    return (samples_.tail(n) - samples_.head(n)) * scale;
}

double PhaseTrace::variance() const {
    const double mean = samples_.mean();
    return (samples_.array() - mean).square().mean();
}

PhaseTrace PhaseTrace::with_samples(Eigen::VectorXd samples) const {
    return PhaseTrace(sample_rate_, std::move(samples), t0_, label_);
}

PhaseTrace PhaseTrace::with_label(std::string label) const {
    return PhaseTrace(sample_rate_, samples_, t0_, std::move(label));
}

void write_trace_csv(const PhaseTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "time_s,phase_rad\n";
    for (Eigen::Index n = 0; n < trace.size(); ++n)
        out << format_double(trace.time(n)) << ',' << format_double(trace.samples()[n]) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

double parse_number(const std::string& text, const std::string& line) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        throw ValidationError("trace.csv", "malformed row: " + line);
    return value;
}

} // namespace

PhaseTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "time_s,phase_rad")
        throw ValidationError("trace.csv", "expected header 'time_s,phase_rad' in " + path.string());
    std::vector<double> times;
    std::vector<double> phases;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("trace.csv", "malformed row: " + line);
        times.push_back(parse_number(line.substr(0, comma), line));
        phases.push_back(parse_number(line.substr(comma + 1), line));
    }
    if (times.size() < 2) throw ValidationError("trace.csv", "need at least two rows to infer sample rate");
    const double fs = static_cast<double>(times.size() - 1) / (times.back() - times.front());
    return PhaseTrace(fs, Eigen::Map<Eigen::VectorXd>(phases.data(), static_cast<Eigen::Index>(phases.size())),
                      times.front());
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        throw ValidationError("trace.binary", "truncated frame");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

} // namespace

void write_trace_binary(const PhaseTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kTraceMagic, 4);
    put_le<std::uint32_t>(out, kTraceVersion);
    put_le<double>(out, trace.sample_rate());
    put_le<double>(out, trace.t0());
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(trace.size()));
    for (Eigen::Index n = 0; n < trace.size(); ++n) put_le<double>(out, trace.samples()[n]);
    if (!out) throw IoError("write failed: " + path.string());
}

PhaseTrace read_trace_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kTraceMagic, 4) != 0)
        throw ValidationError("trace.binary", "bad magic in " + path.string());
    const auto version = get_le<std::uint32_t>(in);
    if (version != kTraceVersion)
        throw ValidationError("trace.binary", "unsupported version " + std::to_string(version));
    const double fs = get_le<double>(in);
    const double t0 = get_le<double>(in);
    const auto n = get_le<std::uint64_t>(in);
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const auto payload = static_cast<std::uint64_t>(in.tellg() - header_end);
    in.seekg(header_end);
    if (n > payload / sizeof(double)) throw ValidationError("trace.binary", "truncated frame");
    Eigen::VectorXd samples(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) samples[static_cast<Eigen::Index>(i)] = get_le<double>(in);
    return PhaseTrace(fs, std::move(samples), t0);
}

} // namespace laserlock
