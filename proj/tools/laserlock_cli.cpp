#include "laserlock/csv.hpp"
#include "laserlock/errors.hpp"
#include "laserlock/harmonics.hpp"
#include "laserlock/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

using namespace laserlock;

struct Options {
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    bool allow_unlock = false;
    unsigned jobs = 0;
    std::vector<std::string> sets;
    double phi2 = -1.0;
    int n_photons = 8;
};

std::string default_out_root() {
    if (const char* env = std::getenv("LASERLOCK_OUT"); env && *env) return env;
    return "out";
}

void print_summaries(const RunReport& report) {
    if (report.runs.empty()) return;
    bool any_lock = false;
    for (const auto& r : report.runs) any_lock = any_lock || r.lock_ran;
    for (const auto& r : report.runs) std::cerr << "wrote " << r.directory.string() << "\n";
    if (!any_lock) return;
    std::cout << summary_header(report.runs.front().n_photons) << "\n";
    for (const auto& r : report.runs) {
        if (!r.lock_ran) continue;
        const auto row = summary_row(r);
        for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << row[i];
        std::cout << "\n";
    }
    for (const auto& r : report.runs)
        if (r.lock_ran && !r.locked)
            std::cerr << "lock lost: " << r.scenario << " seed " << r.seed << "\n";
}

int run(const Options& o, const CLI::App& cmd, std::optional<std::vector<std::string>> outputs) {
    const Scenario s = load_scenario(o.scenario);
    RunOptions ro;
    ro.out_root = o.out;
    if (cmd.count("--seed")) ro.seed = o.seed;
    ro.allow_unlock = o.allow_unlock;
    ro.outputs = std::move(outputs);
    const RunReport report = run_scenario(s, ro);
    print_summaries(report);
    return report.exit_status;
}

int run_efficiency_table(const Options& o) {
    std::cout << "n_photons,eta\n";
    for (int n = 1; n <= o.n_photons; ++n)
        std::cout << n << "," << format_double(excitation_efficiency(o.phi2, n)) << "\n";
    return kExitOk;
}

int run_sweep_command(const Options& o, const CLI::App& cmd) {
    std::vector<SweepAxis> axes;
    for (const auto& s : o.sets) axes.push_back(parse_sweep_axis(s));
    RunOptions ro;
    ro.out_root = o.out;
    if (cmd.count("--seed")) ro.seed = o.seed;
    ro.allow_unlock = o.allow_unlock;
    const unsigned jobs = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
    const RunReport report = run_sweep(o.scenario, axes, ro, jobs);
    print_summaries(report);
    return report.exit_status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cavity-stabilized diode laser simulator"};
    app.require_subcommand(1);
    Options o;
    o.out = default_out_root();

    auto add_common = [&](CLI::App* sub, bool scenario_required) {
        auto* opt = sub->add_option("--scenario", o.scenario, "Scenario file");
        if (scenario_required) opt->required();
        sub->add_option("--out", o.out, "Output root (default $LASERLOCK_OUT or ./out)");
        sub->add_option("--seed", o.seed, "Run this seed instead of the scenario's list");
        sub->add_flag("--allow-unlock", o.allow_unlock, "Exit 0 even when the lock is lost");
    };

    auto* simulate = app.add_subcommand("simulate", "Run every output the scenario requests");
    add_common(simulate, true);
    auto* psd = app.add_subcommand("psd", "Residual and free-running phase PSD, field spectrum");
    add_common(psd, true);
    auto* allan_cmd = app.add_subcommand("allan", "Allan deviation of the cavity-limited beat note");
    add_common(allan_cmd, true);
    auto* efficiency = app.add_subcommand("efficiency", "Excitation efficiency from a lock run or a given phase variance");
    add_common(efficiency, false);
    efficiency->add_option("--phi2", o.phi2, "Phase variance at the fundamental, rad^2")->check(CLI::NonNegativeNumber);
    efficiency->add_option("--n-photons", o.n_photons, "Largest photon order in the table")->check(CLI::PositiveNumber);
    auto* lineshape = app.add_subcommand("lineshape", "Two-photon excitation profiles");
    add_common(lineshape, true);
    auto* sweep = app.add_subcommand("sweep", "Cartesian parameter grid over numeric scenario keys");
    add_common(sweep, true);
    sweep->add_option("--set", o.sets, "key=v1,v2,... (repeatable)")->required();
    sweep->add_option("--jobs", o.jobs, "Worker threads (default: hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*simulate) return run(o, *simulate, std::nullopt);
        if (*psd) return run(o, *psd, std::vector<std::string>{"psd", "field"});
        if (*allan_cmd) return run(o, *allan_cmd, std::vector<std::string>{"allan"});
        if (*lineshape) return run(o, *lineshape, std::vector<std::string>{"lineshape"});
        if (*efficiency) {
            if (efficiency->count("--phi2")) return run_efficiency_table(o);
            if (o.scenario.empty()) {
                std::cerr << "efficiency: give --scenario or --phi2\n";
                return kExitValidation;
            }
            return run(o, *efficiency, std::vector<std::string>{"efficiency"});
        }
        if (*sweep) return run_sweep_command(o, *sweep);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
