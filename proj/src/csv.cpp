#include "laserlock/csv.hpp"

#include "laserlock/errors.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace laserlock {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
    return out;
}

void check(const std::ofstream& out, const std::filesystem::path& path) {
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

void write_spectrum_csv(const SpectrumEstimate& s, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << "# kind=" << to_string(s.kind) << ",rbw_hz=" << format_double(s.rbw)
        << ",bin_width_hz=" << format_double(s.bin_width) << ",averages=" << s.averages
        << ",reference_power=" << format_double(s.reference_power) << '\n';
    out << "freq_hz,psd\n";
    for (Eigen::Index k = 0; k < s.freqs.size(); ++k)
        out << format_double(s.freqs[k]) << ',' << format_double(s.psd[k]) << '\n';
    check(out, path);
}

void write_allan_csv(const std::vector<AllanResult>& results, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << "# nu0_hz=" << (results.empty() ? std::string("0") : format_double(results.front().nu0)) << '\n';
    out << "gate_s,tau_s,sigma_y,drift_subtracted\n";
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.taus.size(); ++i)
            out << format_double(r.gate) << ',' << format_double(r.taus[i]) << ',' << format_double(r.sigma_y[i])
                << ',' << (r.drift_subtracted ? "true" : "false") << '\n';
    check(out, path);
}

void write_lineshape_csv(const Eigen::VectorXd& grid,
                         const std::vector<std::pair<std::string, Eigen::VectorXd>>& profiles,
                         const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << "detuning_hz";
    if (profiles.size() == 1) {
        out << ",amplitude";
    } else {
        for (const auto& [label, _] : profiles) out << ",amplitude_" << label;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        out << format_double(grid[i]);
        for (const auto& [_, p] : profiles) out << ',' << format_double(p[i]);
        out << '\n';
    }
    check(out, path);
}

void write_rows(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::vector<std::string>>& rows) {
    auto out = open_for_write(path);
    out << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    check(out, path);
}

} // namespace laserlock
