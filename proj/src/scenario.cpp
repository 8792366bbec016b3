#include "laserlock/scenario.hpp"

#include "laserlock/csv.hpp"
#include "laserlock/errors.hpp"
#include "laserlock/harmonics.hpp"
#include "laserlock/metrics.hpp"
#include "laserlock/rng.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace laserlock {

namespace {

const std::vector<std::string> kOutputs{"psd", "field", "allan", "efficiency", "lineshape"};

enum class FieldKind { number, integer, boolean, text, numbers, seeds, words, lasers };

// One scenario key: where it lives in the file and in the struct.
struct Field {
    std::string key;
    FieldKind kind;
    std::function<void*(Scenario&)> ref;
};

template <typename T, typename F>
Field field(std::string key, FieldKind kind, F accessor) {
    return {std::move(key), kind, [accessor](Scenario& s) -> void* { return static_cast<void*>(&accessor(s)); }};
}

#define LL_NUM(key, member) field<double>(key, FieldKind::number, [](Scenario& s) -> auto& { return s.member; })
#define LL_INT(key, member) field<int>(key, FieldKind::integer, [](Scenario& s) -> auto& { return s.member; })
#define LL_BOOL(key, member) field<bool>(key, FieldKind::boolean, [](Scenario& s) -> auto& { return s.member; })

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f{
            field<std::string>("name", FieldKind::text, [](Scenario& s) -> auto& { return s.name; }),
            LL_NUM("duration_s", duration),
            field<std::vector<std::uint64_t>>("seeds", FieldKind::seeds, [](Scenario& s) -> auto& { return s.seeds; }),

            LL_NUM("laser.noise.h_m2", laser.h[0]),
            LL_NUM("laser.noise.h_m1", laser.h[1]),
            LL_NUM("laser.noise.h_0", laser.h[2]),
            LL_NUM("laser.noise.h_p1", laser.h[3]),
            LL_NUM("laser.noise.h_p2", laser.h[4]),
            LL_NUM("laser.noise.drift_rate_hz_per_s", laser.drift_rate),
            LL_NUM("laser.noise.f_low_hz", laser.f_low),
            LL_NUM("laser.noise.f_high_hz", laser.f_high),

            LL_NUM("laser.geometry.solitary_linewidth_hz", geometry.delta_nu_ld),
            LL_NUM("laser.geometry.cavity_length_m", geometry.cavity_length),
            LL_NUM("laser.geometry.diode_length_m", geometry.diode_length),
            LL_NUM("laser.geometry.refractive_index", geometry.refractive_index),

            LL_NUM("cavity.fsr_hz", cavity.fsr),
            LL_NUM("cavity.linewidth_hz", cavity.linewidth),
            LL_NUM("cavity.drift_rate_hz_per_s", cavity.drift_rate),
            LL_NUM("cavity.thermal_floor", cavity.thermal_floor),
            LL_NUM("cavity.coupling_ratio", cavity.coupling_ratio),

            LL_NUM("pdh.mod_freq_hz", pdh.mod_freq),
            LL_NUM("pdh.mod_depth_rad", pdh.mod_depth),
            LL_NUM("pdh.photodetector_gain_v_per_w", pdh.photodetector_gain),
            LL_NUM("pdh.demod_phase_rad", pdh.demod_phase),

            LL_NUM("servo.fast_gain", servo.fast_gain),
            LL_NUM("servo.fast_bw_hz", servo.fast_bw),
            LL_NUM("servo.fast_actuator_hz_per_v", servo.fast_actuator),
            LL_NUM("servo.fast_range_v", servo.fast_range),
            LL_NUM("servo.pi1_kp", servo.pi1_kp),
            LL_NUM("servo.pi1_ki_per_s", servo.pi1_ki),
            LL_NUM("servo.hv_actuator_hz_per_v", servo.hv_actuator),
            LL_NUM("servo.hv_range_v", servo.hv_range),
            LL_BOOL("servo.pi2_enabled", servo.pi2_enabled),
            LL_NUM("servo.pi2_tau_s", servo.pi2_tau),
            LL_NUM("servo.pzt_actuator_hz_per_v", servo.pzt_actuator),
            LL_NUM("servo.pzt_range_v", servo.pzt_range),
            LL_NUM("servo.pzt_bw_hz", servo.pzt_bw),
            LL_NUM("servo.sim_rate_hz", servo.sim_rate),
            LL_NUM("servo.initial_detuning_hz", servo.initial_detuning),
            LL_BOOL("servo.nonlinear_pdh", servo.nonlinear_pdh),
            LL_NUM("servo.design_slope_v_per_hz", servo.design_slope),

            field<std::vector<std::string>>("analysis.outputs", FieldKind::words,
                                            [](Scenario& s) -> auto& { return s.analysis.outputs; }),
            LL_NUM("analysis.bandwidth_hz", analysis.bandwidth),
            LL_INT("analysis.n_photons", analysis.n_photons),
            LL_BOOL("analysis.export_traces", analysis.export_traces),
            field<Eigen::Index>("analysis.psd.segment_len", FieldKind::integer,
                                [](Scenario& s) -> auto& { return s.analysis.psd_segment_len; }),
            LL_NUM("analysis.psd.overlap", analysis.psd_overlap),
            LL_NUM("analysis.field.rbw_hz", analysis.field_rbw),
            LL_INT("analysis.field.harmonic", analysis.field_harmonic),
            LL_NUM("analysis.allan.duration_s", analysis.allan_duration),
            LL_NUM("analysis.allan.sample_rate_hz", analysis.allan_sample_rate),
            field<std::vector<double>>("analysis.allan.gates_s", FieldKind::numbers,
                                       [](Scenario& s) -> auto& { return s.analysis.allan_gates; }),
            LL_NUM("analysis.allan.max_tau_s", analysis.allan_max_tau),
            LL_NUM("analysis.allan.beat_offset_hz", analysis.allan_beat_offset),
            LL_NUM("analysis.allan.reference_drift_hz_per_s", analysis.allan_reference_drift),
            LL_BOOL("analysis.allan.subtract_drift", analysis.allan_subtract_drift),
            LL_NUM("analysis.allan.nu0_hz", analysis.nu0),
            field<std::vector<LineModel>>("analysis.lineshape.lasers", FieldKind::lasers,
                                          [](Scenario& s) -> auto& { return s.analysis.lineshape_lasers; }),
            LL_NUM("analysis.lineshape.natural_width_hz", analysis.natural_width),
            LL_NUM("analysis.lineshape.transit_width_hz", analysis.transit_width),
            LL_NUM("analysis.lineshape.span_hz", analysis.lineshape_span),
            LL_INT("analysis.lineshape.points", analysis.lineshape_points),
            LL_NUM("analysis.lineshape.laser_bin_hz", analysis.lineshape_bin),
        };
        return f;
    }();
    return fields;
}

#undef LL_NUM
#undef LL_INT
#undef LL_BOOL

// Keys accepted on input only; they are folded into the schema fields above.
const std::set<std::string> kInputOnly{"laser.noise.linewidth_hz", "laser.noise.from_geometry"};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    return parts;
}

std::string where(const YAML::Mark& mark, const std::string& origin) {
    if (mark.line < 0) return origin;
    return origin + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
}

YAML::Node lookup(const YAML::Node& root, const std::string& key) {
    YAML::Node cur = root;
    for (const auto& part : split(key, '.')) {
        if (!cur || !cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
        const YAML::Node next = cur[part];
        if (!next) return YAML::Node(YAML::NodeType::Undefined);
        cur.reset(next);
    }
    return cur;
}

void collect_leaves(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, YAML::Mark>>& out) {
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const std::string key = prefix.empty() ? kv.first.as<std::string>() : prefix + "." + kv.first.as<std::string>();
            collect_leaves(kv.second, key, out);
        }
    } else {
        out.emplace_back(prefix, node.Mark());
    }
}

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const std::string& value) {
    if (i + 1 == parts.size()) {
        node[parts[i]] = value;
        return;
    }
    if (!node[parts[i]] || !node[parts[i]].IsMap()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    set_path(node[parts[i]], parts, i + 1, value);
}

template <typename T>
T convert(const YAML::Node& node, const std::string& key, const std::string& origin, const char* expected) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ValidationError(key, where(node.Mark(), origin) + ": expected " + expected);
    }
}

void read_field(const Field& f, const YAML::Node& node, Scenario& s, const std::string& origin) {
    void* target = f.ref(s);
    switch (f.kind) {
    case FieldKind::number:
        *static_cast<double*>(target) = convert<double>(node, f.key, origin, "a number");
        break;
    case FieldKind::integer:
        if (f.key == "analysis.psd.segment_len")
            *static_cast<Eigen::Index*>(target) = convert<long long>(node, f.key, origin, "an integer");
        else
            *static_cast<int*>(target) = convert<int>(node, f.key, origin, "an integer");
        break;
    case FieldKind::boolean:
        *static_cast<bool*>(target) = convert<bool>(node, f.key, origin, "true or false");
        break;
    case FieldKind::text:
        *static_cast<std::string*>(target) = convert<std::string>(node, f.key, origin, "a string");
        break;
    case FieldKind::numbers:
        *static_cast<std::vector<double>*>(target) = convert<std::vector<double>>(node, f.key, origin, "a list of numbers");
        break;
    case FieldKind::seeds:
        *static_cast<std::vector<std::uint64_t>*>(target) =
            convert<std::vector<std::uint64_t>>(node, f.key, origin, "a list of non-negative integers");
        break;
    case FieldKind::words:
        *static_cast<std::vector<std::string>*>(target) = convert<std::vector<std::string>>(node, f.key, origin, "a list of names");
        break;
    case FieldKind::lasers: {
        if (!node.IsSequence()) throw ValidationError(f.key, where(node.Mark(), origin) + ": expected a list");
        std::vector<LineModel> models;
        for (const auto& item : node) {
            if (!item.IsMap() || !item["label"] || !item["fwhm_243_hz"])
                throw ValidationError(f.key, where(item.Mark(), origin) + ": entries need label and fwhm_243_hz");
            models.push_back({convert<std::string>(item["label"], f.key, origin, "a string"),
                              convert<double>(item["fwhm_243_hz"], f.key, origin, "a number")});
        }
        *static_cast<std::vector<LineModel>*>(target) = std::move(models);
        break;
    }
    }
}

void emit_field(YAML::Emitter& out, const Field& f, Scenario& s) {
    void* target = f.ref(s);
    switch (f.kind) {
    case FieldKind::number: out << format_double(*static_cast<double*>(target)); break;
    case FieldKind::integer:
        if (f.key == "analysis.psd.segment_len")
            out << static_cast<long long>(*static_cast<Eigen::Index*>(target));
        else
            out << *static_cast<int*>(target);
        break;
    case FieldKind::boolean: out << YAML::TrueFalseBool << *static_cast<bool*>(target); break;
    case FieldKind::text: out << YAML::DoubleQuoted << *static_cast<std::string*>(target); break;
    case FieldKind::numbers: {
        out << YAML::Flow << YAML::BeginSeq;
        for (double v : *static_cast<std::vector<double>*>(target)) out << format_double(v);
        out << YAML::EndSeq;
        break;
    }
    case FieldKind::seeds: {
        out << YAML::Flow << YAML::BeginSeq;
        for (auto v : *static_cast<std::vector<std::uint64_t>*>(target)) out << v;
        out << YAML::EndSeq;
        break;
    }
    case FieldKind::words: {
        out << YAML::Flow << YAML::BeginSeq;
        for (const auto& v : *static_cast<std::vector<std::string>*>(target)) out << v;
        out << YAML::EndSeq;
        break;
    }
    case FieldKind::lasers: {
        out << YAML::BeginSeq;
        for (const auto& m : *static_cast<std::vector<LineModel>*>(target))
            out << YAML::Flow << YAML::BeginMap << YAML::Key << "label" << YAML::Value << m.label << YAML::Key
                << "fwhm_243_hz" << YAML::Value << format_double(m.fwhm_243) << YAML::EndMap;
        out << YAML::EndSeq;
        break;
    }
    }
}

void validate_scenario(const Scenario& s) {
    using detail::require;
    require(!s.name.empty() && s.name.find('/') == std::string::npos, "name", "must be a non-empty file-name-safe string");
    require(!s.seeds.empty(), "seeds", "must list at least one seed");
    require(std::isfinite(s.duration) && s.duration > 0.0, "duration_s", "must be > 0");
    validate(s.laser);
    validate(s.geometry);
    validate(s.cavity);
    validate(s.pdh, s.cavity);
    validate(s.servo);
    require(s.laser.f_high <= 0.5 * s.servo.sim_rate * (1.0 + 1e-12), "laser.noise.f_high_hz",
            "must not exceed servo.sim_rate_hz / 2");
    require(s.duration * s.servo.sim_rate >= 1.0e4, "duration_s", "needs at least 1e4 loop steps at servo.sim_rate_hz");

    const auto& a = s.analysis;
    for (const auto& o : a.outputs)
        require(std::find(kOutputs.begin(), kOutputs.end(), o) != kOutputs.end(), "analysis.outputs",
                "unknown output '" + o + "' (psd, field, allan, efficiency, lineshape)");
    require(std::isfinite(a.bandwidth) && a.bandwidth > 0.0, "analysis.bandwidth_hz", "must be > 0");
    require(a.n_photons >= 1, "analysis.n_photons", "must be >= 1");
    require(a.psd_segment_len >= 4, "analysis.psd.segment_len", "must be >= 4");
    require(a.psd_overlap >= 0.0 && a.psd_overlap < 1.0, "analysis.psd.overlap", "must lie in [0, 1)");
    require(std::isfinite(a.field_rbw) && a.field_rbw > 0.0, "analysis.field.rbw_hz", "must be > 0");
    require(a.field_rbw >= 2.0 / s.duration, "analysis.field.rbw_hz", "must be at least 2 / duration_s");
    require(a.field_harmonic >= 1, "analysis.field.harmonic", "must be >= 1");
    require(std::isfinite(a.allan_duration) && a.allan_duration > 0.0, "analysis.allan.duration_s", "must be > 0");
    require(std::isfinite(a.allan_sample_rate) && a.allan_sample_rate > 0.0, "analysis.allan.sample_rate_hz", "must be > 0");
    require(!a.allan_gates.empty(), "analysis.allan.gates_s", "must list at least one gate");
    for (double g : a.allan_gates)
        require(std::isfinite(g) && g * a.allan_sample_rate >= 10.0 - 1e-9, "analysis.allan.gates_s",
                "each gate must span at least 10 samples");
    require(std::isfinite(a.allan_max_tau) && a.allan_max_tau > 0.0, "analysis.allan.max_tau_s", "must be > 0");
    require(std::isfinite(a.allan_beat_offset) && a.allan_beat_offset >= 0.0, "analysis.allan.beat_offset_hz", "must be >= 0");
    require(std::isfinite(a.allan_reference_drift), "analysis.allan.reference_drift_hz_per_s", "must be finite");
    require(std::isfinite(a.nu0) && a.nu0 > 0.0, "analysis.allan.nu0_hz", "must be > 0");
    for (const auto& m : a.lineshape_lasers) {
        require(!m.label.empty(), "analysis.lineshape.lasers", "labels must be non-empty");
        require(std::isfinite(m.fwhm_243) && m.fwhm_243 >= 0.0, "analysis.lineshape.lasers", "fwhm_243_hz must be >= 0");
    }
    require(a.natural_width >= 0.0, "analysis.lineshape.natural_width_hz", "must be >= 0");
    require(a.transit_width >= 0.0, "analysis.lineshape.transit_width_hz", "must be >= 0");
    require(a.lineshape_span > 0.0, "analysis.lineshape.span_hz", "must be > 0");
    require(a.lineshape_points >= 3, "analysis.lineshape.points", "must be >= 3");
    require(a.lineshape_bin > 0.0 && a.lineshape_bin < a.lineshape_span, "analysis.lineshape.laser_bin_hz",
            "must be > 0 and below span_hz");
}

} // namespace

bool AnalysisConfig::wants(const std::string& output) const {
    return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

bool Scenario::operator==(const Scenario& o) const {
    return name == o.name && laser == o.laser && geometry == o.geometry && cavity == o.cavity && pdh == o.pdh &&
           servo == o.servo && analysis == o.analysis && seeds == o.seeds && duration == o.duration;
}

Scenario parse_scenario(const std::string& text, const std::string& origin,
                        const std::vector<std::pair<std::string, std::string>>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ValidationError("parse", where(e.mark, origin) + ": " + e.msg);
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ValidationError("parse", origin + ": top level must be a mapping");
    for (const auto& [key, value] : overrides) set_path(root, split(key, '.'), 0, value);

    std::set<std::string> known;
    for (const auto& f : schema()) known.insert(f.key);
    std::vector<std::pair<std::string, YAML::Mark>> leaves;
    collect_leaves(root, "", leaves);
    for (const auto& [key, mark] : leaves) {
        const bool list_item = key.rfind("analysis.lineshape.lasers", 0) == 0;
        if (!known.count(key) && !kInputOnly.count(key) && !list_item)
            throw ValidationError(key, where(mark, origin) + ": unknown key");
    }

    Scenario s;
    for (const auto& f : schema()) {
        const YAML::Node node = lookup(root, f.key);
        if (node) {
            read_field(f, node, s, origin);
        } else {
            s.defaulted.push_back(f.key);
        }
    }

    const YAML::Node linewidth = lookup(root, "laser.noise.linewidth_hz");
    const YAML::Node from_geometry = lookup(root, "laser.noise.from_geometry");
    const bool has_h0 = static_cast<bool>(lookup(root, "laser.noise.h_0"));
    const bool use_geometry = from_geometry && convert<bool>(from_geometry, "laser.noise.from_geometry", origin, "true or false");
    if (static_cast<int>(has_h0) + static_cast<int>(static_cast<bool>(linewidth)) + static_cast<int>(use_geometry) > 1)
        throw ValidationError("laser.noise", origin + ": give only one of h_0, linewidth_hz, from_geometry");
    if (linewidth) {
        s.laser.set_coefficient(0, white_fm_level(convert<double>(linewidth, "laser.noise.linewidth_hz", origin, "a number")));
        std::erase(s.defaulted, std::string("laser.noise.h_0"));
    } else if (use_geometry) {
        s.laser.set_coefficient(0, white_fm_level(ecdl_linewidth(s.geometry)));
        std::erase(s.defaulted, std::string("laser.noise.h_0"));
    } else if (!has_h0) {
        s.laser.set_coefficient(0, white_fm_level(20.0e3));
    }
    if (!lookup(root, "laser.noise.f_high_hz")) s.laser.f_high = 0.5 * s.servo.sim_rate;

    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

std::string dump_scenario(const Scenario& scenario) {
    Scenario s = scenario;
    YAML::Emitter out;
    out << YAML::BeginMap;
    // fields are grouped by their dotted prefix; schema order keeps groups contiguous
    std::vector<std::string> open;
    auto close_to = [&](std::size_t depth) {
        while (open.size() > depth) {
            out << YAML::EndMap;
            open.pop_back();
        }
    };
    for (const auto& f : schema()) {
        auto parts = split(f.key, '.');
        const std::string leaf = parts.back();
        parts.pop_back();
        std::size_t common = 0;
        while (common < open.size() && common < parts.size() && open[common] == parts[common]) ++common;
        close_to(common);
        for (std::size_t i = common; i < parts.size(); ++i) {
            out << YAML::Key << parts[i] << YAML::Value << YAML::BeginMap;
            open.push_back(parts[i]);
        }
        out << YAML::Key << leaf << YAML::Value;
        emit_field(out, f, s);
    }
    close_to(0);
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

const std::vector<std::string>& assumption_keys() {
    static const std::vector<std::string> keys{
        "laser.noise.h_0",
        "laser.geometry.solitary_linewidth_hz",
        "laser.geometry.diode_length_m",
        "laser.geometry.refractive_index",
        "cavity.fsr_hz",
        "cavity.linewidth_hz",
        "cavity.coupling_ratio",
        "pdh.mod_freq_hz",
        "pdh.mod_depth_rad",
        "pdh.photodetector_gain_v_per_w",
        "pdh.demod_phase_rad",
        "servo.fast_gain",
        "servo.fast_actuator_hz_per_v",
        "servo.fast_range_v",
        "servo.pi1_kp",
        "servo.pi1_ki_per_s",
        "servo.hv_actuator_hz_per_v",
        "servo.hv_range_v",
        "servo.pzt_actuator_hz_per_v",
        "servo.pzt_range_v",
        "servo.pzt_bw_hz",
    };
    return keys;
}

std::vector<AllanResult> run_allan_pipeline(const Scenario& s, std::uint64_t seed) {
    const auto& a = s.analysis;
    // Each locked laser follows its cavity at long times: flicker-FM thermal
    // floor (sigma_y^2 = 2 ln2 h_-1 / nu0^2) plus the cavity's linear drift.
    const double fs = a.allan_sample_rate;
    auto cavity_noise = [&](double drift) {
        NoiseSpec n;
        const double floor_hz = s.cavity.thermal_floor * a.nu0;
        n.set_coefficient(-1, floor_hz * floor_hz / (2.0 * std::log(2.0)));
        n.drift_rate = drift;
        n.f_low = 0.1 / a.allan_duration;
        n.f_high = 0.5 * fs;
        return n;
    };
    const PhaseTrace first = generate_phase(cavity_noise(s.cavity.drift_rate), a.allan_duration, fs, stream_seed(seed, 101));
    const PhaseTrace second =
        generate_phase(cavity_noise(a.allan_reference_drift), a.allan_duration, fs, stream_seed(seed, 102));
    const PhaseTrace note = beat(first, second, a.allan_beat_offset);

    std::vector<AllanResult> results;
    for (double gate : a.allan_gates) {
        const auto readings = counter(note, gate, a.allan_beat_offset);
        const double max_tau = std::min(a.allan_max_tau, gate * static_cast<double>(readings.size()) / 3.0);
        results.push_back(allan(readings, gate, a.nu0, log_taus(gate, max_tau), a.allan_subtract_drift));
    }
    return results;
}

std::string summary_header(int n_photons) {
    return "scenario,seed,phi2_rms_rad2,bandwidth_hz,carrier_fraction,eta_n" + std::to_string(n_photons) +
           ",locked,saturation_events,final_detuning_hz";
}

std::vector<std::string> summary_row(const RunSummary& r) {
    return {r.scenario,
            std::to_string(r.seed),
            format_double(r.phi2_rms),
            format_double(r.bandwidth),
            format_double(r.carrier_fraction),
            format_double(r.efficiency),
            r.locked ? "true" : "false",
            std::to_string(r.saturation_events),
            format_double(r.final_detuning)};
}

namespace {

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

nlohmann::ordered_json manifest_for(const Scenario& s, std::uint64_t seed, const std::vector<std::string>& outputs,
                                    const std::vector<AllanResult>& allan_results, const RunSummary& summary) {
    nlohmann::ordered_json m;
    m["scenario"] = s.name;
    m["seed"] = seed;
    m["version"] = LASERLOCK_VERSION;
    m["rng"] = std::string(kRngAlgorithm);
    m["outputs"] = outputs;
    m["defaulted"] = s.defaulted;
    m["assumptions"] = assumption_keys();
    m["scenario_echo"] = dump_scenario(s);
    m["conventions"] = {
        {"frequency_psd", "one-sided S_nu(f), Hz^2/Hz; S_phi = S_nu / f^2"},
        {"phi2_rms", "phase variance, one-sided S_phi integrated over (0, B], carrier bin excluded"},
        {"mrad2", "1 mrad^2 read as 1e-3 rad^2"},
        {"allan", "overlapping, Pi-type counter, zero dead time"},
    };
    if (summary.lock_ran) {
        m["phase_bandwidth_hz"] = {{"requested", s.analysis.bandwidth}, {"used", summary.bandwidth}};
    }
    if (!allan_results.empty()) {
        const double floor = s.cavity.thermal_floor;
        m["thermal_floor"] = {{"per_cavity", floor}, {"beat_two_cavities", floor * std::sqrt(2.0)}};
        nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
        for (const auto& r : allan_results)
            for (const auto& w : r.warnings)
                warnings.push_back({{"gate_s", r.gate}, {"tau_s", w.tau}, {"message", w.message}});
        m["allan_warnings"] = warnings;
    }
    return m;
}

} // namespace

RunSummary run_scenario_seed(const Scenario& s, std::uint64_t seed, const std::vector<std::string>& outputs,
                             const std::filesystem::path& dir) {
    ensure_directory(dir);
    auto wants = [&](const char* o) { return std::find(outputs.begin(), outputs.end(), o) != outputs.end(); };
    const auto& a = s.analysis;

    RunSummary summary;
    summary.scenario = s.name;
    summary.seed = seed;
    summary.n_photons = a.n_photons;
    summary.directory = dir;

    if (wants("psd") || wants("field") || wants("efficiency")) {
        const LockResult lock = run_lock(s.laser, s.cavity, s.pdh, s.servo, s.duration, seed);
        const Eigen::Index seg = std::min<Eigen::Index>(a.psd_segment_len, lock.residual.size());
        const SpectrumEstimate residual_psd = estimate_psd(lock.residual, seg, a.psd_overlap, SpectrumKind::phase);
        summary.lock_ran = true;
        summary.bandwidth = std::min(a.bandwidth, residual_psd.freqs[residual_psd.freqs.size() - 1]);
        summary.phi2_rms = rms_phase_in_bandwidth(residual_psd, summary.bandwidth);
        summary.carrier_fraction = carrier_fraction(summary.phi2_rms);
        summary.efficiency = excitation_efficiency(summary.phi2_rms, a.n_photons);
        summary.locked = lock.locked;
        summary.saturation_events = lock.saturation_events;
        summary.final_detuning = lock.final_detuning;

        write_rows(dir / "summary.csv", summary_header(a.n_photons), {summary_row(summary)});
        if (wants("psd")) {
            write_spectrum_csv(residual_psd, dir / "psd.csv");
            write_spectrum_csv(estimate_psd(lock.free_run, seg, a.psd_overlap, SpectrumKind::phase),
                               dir / "psd_free_run.csv");
        }
        if (wants("field"))
            write_spectrum_csv(field_spectrum(multiply_phase(lock.residual, a.field_harmonic), a.field_rbw),
                               dir / "field.csv");
        if (wants("efficiency")) {
            std::vector<std::vector<std::string>> rows;
            for (int n = 1; n <= a.n_photons; ++n)
                rows.push_back({std::to_string(n), format_double(excitation_efficiency(summary.phi2_rms, n))});
            write_rows(dir / "efficiency.csv", "n_photons,eta", rows);
        }
        if (a.export_traces) {
            write_trace_binary(lock.residual, dir / "residual.bin");
            write_trace_binary(PhaseTrace(s.servo.sim_rate, lock.actuators.fast, 0.0, "fast_v"), dir / "fast_v.bin");
            write_trace_binary(PhaseTrace(s.servo.sim_rate, lock.actuators.hv, 0.0, "hv_v"), dir / "hv_v.bin");
            write_trace_binary(PhaseTrace(s.servo.sim_rate, lock.actuators.pzt, 0.0, "pzt_v"), dir / "pzt_v.bin");
        }
    }

    std::vector<AllanResult> allan_results;
    if (wants("allan")) {
        allan_results = run_allan_pipeline(s, seed);
        write_allan_csv(allan_results, dir / "allan.csv");
    }

    if (wants("lineshape")) {
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(a.lineshape_points, -a.lineshape_span, a.lineshape_span);
        std::vector<std::pair<std::string, Eigen::VectorXd>> profiles;
        for (const auto& m : a.lineshape_lasers) {
            const double half_span = std::clamp(100.0 * m.fwhm_243, 20.0 * a.lineshape_bin, a.lineshape_span);
            const SpectrumEstimate laser = lorentzian_field_spectrum(m.fwhm_243, a.lineshape_bin, half_span);
            profiles.emplace_back(m.label, excitation_spectrum(laser, a.natural_width, a.transit_width, grid));
        }
        write_lineshape_csv(grid, profiles, dir / "lineshape.csv");
    }

    std::ofstream manifest(dir / "manifest.json", std::ios::binary);
    if (!manifest) throw IoError("cannot write " + (dir / "manifest.json").string());
    manifest << manifest_for(s, seed, outputs, allan_results, summary).dump(2) << '\n';
    if (!manifest) throw IoError("write failed: " + (dir / "manifest.json").string());
    return summary;
}

RunReport run_scenario(const Scenario& s, const RunOptions& options) {
    RunReport report;
    const auto outputs = options.outputs.value_or(s.analysis.outputs);
    const std::vector<std::uint64_t> seeds = options.seed ? std::vector<std::uint64_t>{*options.seed} : s.seeds;
    for (auto seed : seeds) {
        const auto dir = options.out_root / s.name / ("seed_" + std::to_string(seed));
        report.runs.push_back(run_scenario_seed(s, seed, outputs, dir));
        const auto& r = report.runs.back();
        if (r.lock_ran && !r.locked && !options.allow_unlock) report.exit_status = kExitLockLost;
    }
    return report;
}

SweepAxis parse_sweep_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
        throw ValidationError("sweep", "expected key=v1,v2,... but got '" + spec + "'");
    SweepAxis axis{spec.substr(0, eq), split(spec.substr(eq + 1), ',')};
    for (const auto& v : axis.values) {
        try {
            std::size_t used = 0;
            (void)std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ValidationError(axis.key, "sweep value '" + v + "' is not numeric");
        }
    }
    return axis;
}

RunReport run_sweep(const std::filesystem::path& scenario_path, const std::vector<SweepAxis>& axes,
                    const RunOptions& options, unsigned jobs) {
    std::ifstream in(scenario_path);
    if (!in) throw IoError("cannot open scenario " + scenario_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    // Cartesian product, last axis fastest
    std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
    for (const auto& axis : axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& p : points)
            for (const auto& v : axis.values) {
                auto q = p;
                q.emplace_back(axis.key, v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }

    struct Task {
        std::size_t point;
        Scenario scenario;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < points.size(); ++i) {
        Scenario s = parse_scenario(text, scenario_path.string(), points[i]);
        const auto seeds = options.seed ? std::vector<std::uint64_t>{*options.seed} : s.seeds;
        for (auto seed : seeds) tasks.push_back({i, s, seed});
    }
    if (tasks.empty()) return {};

    const std::string name = tasks.front().scenario.name;
    const auto outputs = options.outputs.value_or(tasks.front().scenario.analysis.outputs);
    std::vector<RunSummary> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                const auto& t = tasks[i];
                const auto dir = options.out_root / name / ("point_" + std::to_string(t.point)) /
                                 ("seed_" + std::to_string(t.seed));
                results[i] = run_scenario_seed(t.scenario, t.seed, outputs, dir);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    RunReport report;
    std::string header = "point";
    for (const auto& axis : axes) header += "," + axis.key;
    header += "," + summary_header(tasks.front().scenario.analysis.n_photons);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        std::vector<std::string> row{std::to_string(tasks[i].point)};
        for (const auto& kv : points[tasks[i].point]) row.push_back(kv.second);
        for (auto& cell : summary_row(results[i])) row.push_back(std::move(cell));
        rows.push_back(std::move(row));
        if (results[i].lock_ran && !results[i].locked && !options.allow_unlock) report.exit_status = kExitLockLost;
    }
    ensure_directory(options.out_root / name);
    write_rows(options.out_root / name / "sweep.csv", header, rows);
    report.runs = std::move(results);
    return report;
}

} // namespace laserlock
