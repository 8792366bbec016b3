#include "laserlock/csv.hpp"
#include "laserlock/errors.hpp"
#include "laserlock/noise.hpp"
#include "laserlock/trace.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

using namespace laserlock;

TEST(PhaseTrace, RejectsInvalidConstruction) {
    EXPECT_THROW(PhaseTrace(0.0, Eigen::VectorXd::Zero(4)), ValidationError);
    EXPECT_THROW(PhaseTrace(-1.0, Eigen::VectorXd::Zero(4)), ValidationError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
    bad[2] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(PhaseTrace(1.0, bad), ValidationError);
}

TEST(PhaseTrace, FrequencyIsScaledDifference) {
    Eigen::VectorXd x(3);
    x << 0.0, 2.0 * std::numbers::pi, 2.0 * std::numbers::pi;
    const PhaseTrace t(10.0, x);
    const auto f = t.frequency();
    ASSERT_EQ(f.size(), 2);
    EXPECT_NEAR(f[0], 10.0, 1e-12);
    EXPECT_NEAR(f[1], 0.0, 1e-12);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e7), "1e+07");
    EXPECT_EQ(format_double(-2.5), "-2.5");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 10000; ++i) {
        const double v = u(rng) * std::pow(10.0, u(rng) / 50.0);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(TraceCsv, RoundTripKeepsSamplesExactly) {
    const auto dir = oracle::scratch_dir("trace_csv");
    const auto t = generate_phase(NoiseSpec::white_fm(10, 1, 500), 1.0, 1e3, 1).with_label("x");
    write_trace_csv(t, dir / "t.csv");
    const auto back = read_trace_csv(dir / "t.csv");
    ASSERT_EQ(back.size(), t.size());
    EXPECT_TRUE((back.samples().array() == t.samples().array()).all());
    EXPECT_NEAR(back.sample_rate(), 1e3, 1e-9);
    EXPECT_EQ(oracle::slurp(dir / "t.csv").substr(0, 18), "time_s,phase_rad\n0");
}

TEST(TraceCsv, RejectsMissingHeaderAndGarbage) {
    const auto dir = oracle::scratch_dir("trace_csv_bad");
    std::ofstream(dir / "a.csv") << "t,p\n0,0\n1,1\n";
    EXPECT_THROW(read_trace_csv(dir / "a.csv"), ValidationError);
    std::ofstream(dir / "b.csv") << "time_s,phase_rad\n0,0\n1,abc\n";
    EXPECT_THROW(read_trace_csv(dir / "b.csv"), ValidationError);
    EXPECT_THROW(read_trace_csv(dir / "missing.csv"), IoError);
}

TEST(TraceBinary, RoundTripIsBitExact) {
    const auto dir = oracle::scratch_dir("trace_bin");
    const PhaseTrace t(123.25, generate_phase(NoiseSpec::white_fm(10, 1, 50), 2.0, 123.25, 2).samples(), 4.5);
    write_trace_binary(t, dir / "t.bin");
    const auto back = read_trace_binary(dir / "t.bin");
    EXPECT_EQ(back.sample_rate(), t.sample_rate());
    EXPECT_EQ(back.t0(), t.t0());
    ASSERT_EQ(back.size(), t.size());
    EXPECT_TRUE((back.samples().array() == t.samples().array()).all());
}

TEST(TraceBinary, FrameLayoutIsLittleEndian) {
    const auto dir = oracle::scratch_dir("trace_bin_layout");
    Eigen::VectorXd x(2);
    x << 1.0, -2.0;
    write_trace_binary(PhaseTrace(1000.0, x), dir / "t.bin");
    const std::string bytes = oracle::slurp(dir / "t.bin");
    ASSERT_EQ(bytes.size(), 4u + 4u + 8u + 8u + 8u + 16u);
    EXPECT_EQ(bytes.substr(0, 4), "LLPT");
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(bytes[i]); };
    EXPECT_EQ(byte(4), 1);
    EXPECT_EQ(byte(5) | byte(6) | byte(7), 0);
    // 1000.0 = 0x408F400000000000
    EXPECT_EQ(byte(15), 0x40);
    EXPECT_EQ(byte(14), 0x8F);
    EXPECT_EQ(byte(13), 0x40);
    EXPECT_EQ(byte(24), 2);  // sample count, low byte first
}

TEST(TraceBinary, RejectsCorruptFrames) {
    const auto dir = oracle::scratch_dir("trace_bin_bad");
    std::ofstream(dir / "magic.bin", std::ios::binary) << "XXXX0000";
    EXPECT_THROW(read_trace_binary(dir / "magic.bin"), ValidationError);

    Eigen::VectorXd x = Eigen::VectorXd::Ones(10);
    write_trace_binary(PhaseTrace(1.0, x), dir / "t.bin");
    std::string bytes = oracle::slurp(dir / "t.bin");
    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    EXPECT_THROW(read_trace_binary(dir / "short.bin"), ValidationError);
    bytes[4] = 9;
    std::ofstream(dir / "version.bin", std::ios::binary) << bytes;
    EXPECT_THROW(read_trace_binary(dir / "version.bin"), ValidationError);
}

TEST(Writers, ReportUnwritablePaths) {
    const auto dir = oracle::scratch_dir("writers");
    const auto target = dir / "no_such_dir" / "t.bin";
    EXPECT_THROW(write_trace_binary(PhaseTrace(1.0, Eigen::VectorXd::Zero(3)), target), IoError);
    EXPECT_THROW(write_rows(target, "a,b", {{"1", "2"}}), IoError);
}

TEST(Writers, SpectrumCsvHeader) {
    const auto dir = oracle::scratch_dir("spectrum_csv");
    SpectrumEstimate s;
    s.kind = SpectrumKind::frequency;
    s.freqs = Eigen::VectorXd::LinSpaced(3, 0.0, 2.0);
    s.psd = Eigen::VectorXd::Constant(3, 0.5);
    s.rbw = 1.5;
    s.bin_width = 1.0;
    s.averages = 4;
    write_spectrum_csv(s, dir / "s.csv");
    EXPECT_EQ(oracle::slurp(dir / "s.csv"),
              "# kind=frequency,rbw_hz=1.5,bin_width_hz=1,averages=4,reference_power=1\n"
              "freq_hz,psd\n0,0.5\n1,0.5\n2,0.5\n");
}
