#include "jpm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace jpm {

using nlohmann::json;

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::DriveTrace: return "drive_trace";
        case ExperimentKind::DetectionSurface: return "detection_surface";
        case ExperimentKind::ContrastVsTime: return "contrast_vs_time";
        case ExperimentKind::ContrastVsRate: return "contrast_vs_rate";
        case ExperimentKind::ResetErrorCurve: return "reset_error_curve";
        case ExperimentKind::FidelityVsTime: return "fidelity_vs_time";
        case ExperimentKind::Lifetimes: return "lifetimes";
        case ExperimentKind::QndRepeat: return "qnd_repeat";
    }
    return "unknown";
}

ExperimentKind experiment_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::DriveTrace, ExperimentKind::DetectionSurface,
                   ExperimentKind::ContrastVsTime, ExperimentKind::ContrastVsRate,
                   ExperimentKind::ResetErrorCurve, ExperimentKind::FidelityVsTime,
                   ExperimentKind::Lifetimes, ExperimentKind::QndRepeat})
        if (to_string(k) == s) return k;
    throw ConfigError("experiment: unknown kind '" + s + "'");
}

namespace {

double tagged_value(const json& node, const std::string& path,
                    const std::set<std::string>& allowed_units) {
    if (!node.is_object() || !node.contains("value") || !node.contains("unit"))
        throw ConfigError(path + ": expected {\"value\": number, \"unit\": tag}");
    for (auto it = node.begin(); it != node.end(); ++it)
        if (it.key() != "value" && it.key() != "unit")
            throw ConfigError(path + "." + it.key() + ": unknown key");
    if (!node["value"].is_number()) throw ConfigError(path + ".value: expected a number");
    if (!node["unit"].is_string()) throw ConfigError(path + ".unit: expected a string tag");
    const std::string unit = node["unit"].get<std::string>();
    if (!allowed_units.count(unit))
        throw ConfigError(path + ".unit: tag '" + unit + "' not valid for this key");
    const double v = node["value"].get<double>();
    if (unit == "MHz_over_2pi") return v * 2.0 * kPi * 1e6;
    if (unit == "MHz_over_pi") return v * kPi * 1e6;
    if (unit == "MHz_rate") return v * 1e6;
    if (unit == "ns") return v * 1e-9;
    throw ConfigError(path + ".unit: unhandled tag '" + unit + "'");
}

const std::set<std::string> kFreqUnits = {"MHz_over_2pi", "MHz_over_pi"};
const std::set<std::string> kRateUnits = {"MHz_rate"};
const std::set<std::string> kTimeUnits = {"ns"};

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) throw ConfigError(path + it.key() + ": unknown key");
}

SystemParams parse_params(const json& j) {
    SystemParams p = SystemParams::defaults();
    const std::set<std::string> known = {
        "omega_c", "omega_q", "omega_j_idle", "omega_j_meas", "g_q", "g_j",
        "gamma_j", "gamma_d", "gamma_r", "kappa", "cavity_decay",
        "drive_amp", "drive_phase_rad", "t_drive", "t_measure", "t_reset"};
    reject_unknown(j, "params.", known);
    bool meas_set = false;
    auto freq = [&](const char* key, double& out) {
        if (j.contains(key)) out = tagged_value(j[key], std::string("params.") + key, kFreqUnits);
    };
    auto rate = [&](const char* key, double& out) {
        if (j.contains(key)) out = tagged_value(j[key], std::string("params.") + key, kRateUnits);
    };
    auto time = [&](const char* key, double& out) {
        if (j.contains(key)) out = tagged_value(j[key], std::string("params.") + key, kTimeUnits);
    };
    freq("omega_c", p.omega_c);
    freq("omega_q", p.omega_q);
    freq("omega_j_idle", p.omega_j_idle);
    if (j.contains("omega_j_meas")) {
        p.omega_j_meas = tagged_value(j["omega_j_meas"], "params.omega_j_meas", kFreqUnits);
        meas_set = true;
    }
    freq("g_q", p.g_q);
    freq("g_j", p.g_j);
    freq("drive_amp", p.drive_amp);
    rate("gamma_j", p.gamma_j);
    rate("gamma_d", p.gamma_d);
    rate("gamma_r", p.gamma_r);
    rate("kappa", p.kappa);
    time("t_drive", p.t_drive);
    time("t_measure", p.t_measure);
    time("t_reset", p.t_reset);
    if (j.contains("cavity_decay")) {
        if (!j["cavity_decay"].is_boolean())
            throw ConfigError("params.cavity_decay: expected a boolean");
        p.cavity_decay = j["cavity_decay"].get<bool>();
    }
    if (j.contains("drive_phase_rad")) {
        if (!j["drive_phase_rad"].is_number())
            throw ConfigError("params.drive_phase_rad: expected a number");
        p.drive_phase = j["drive_phase_rad"].get<double>();
    }
    if (!meas_set) p.omega_j_meas = p.omega_c - p.chi_q();
    p.validate();
    return p;
}

} // namespace

void ExperimentConfig::validate() const {
    params.validate();
    auto need_axis = [&](const char* name) {
        auto it = sweep.find(name);
        if (it == sweep.end())
            throw ConfigError("sweep." + std::string(name) + ": required axis missing for " +
                              to_string(experiment));
        if (it->second.empty())
            throw ConfigError("sweep." + std::string(name) + ": axis is empty");
    };
    switch (experiment) {
        case ExperimentKind::DriveTrace: break;
        case ExperimentKind::DetectionSurface:
            need_axis("alpha_sq");
            need_axis("t_m_ns");
            break;
        case ExperimentKind::ContrastVsTime: need_axis("t_m_ns"); break;
        case ExperimentKind::ContrastVsRate:
            need_axis("gamma_j_mhz");
            need_axis("alpha_sq");
            break;
        case ExperimentKind::ResetErrorCurve:
            need_axis("alpha_sq");
            need_axis("subtractions");
            break;
        case ExperimentKind::FidelityVsTime: break;
        case ExperimentKind::Lifetimes: need_axis("photon_numbers"); break;
        case ExperimentKind::QndRepeat: break;
    }
    if (integrator.dt <= 0.0) throw ConfigError("integrator.dt_ps: must be positive");
    if (initial_qubit != "zero" && initial_qubit != "one" && initial_qubit != "plus")
        throw ConfigError("initial_qubit: expected zero | one | plus");
}

const std::vector<double>& ExperimentConfig::axis(const std::string& name) const {
    auto it = sweep.find(name);
    if (it == sweep.end()) throw ConfigError("sweep." + name + ": axis missing");
    return it->second;
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top-level JSON object expected");
    const std::set<std::string> known = {"experiment", "params",  "mode",   "sweep",
                                         "initial_qubit", "reset_between", "integrator",
                                         "output",     "seed",   "workers"};
    reject_unknown(j, "", known);

    ExperimentConfig cfg;
    if (!j.contains("experiment") || !j["experiment"].is_string())
        throw ConfigError("experiment: required string key");
    cfg.experiment = experiment_from_string(j["experiment"].get<std::string>());
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError("params: object expected");
        cfg.params = parse_params(j["params"]);
    }
    if (j.contains("mode")) {
        const std::string m = j["mode"].get<std::string>();
        if (m == "dispersive") cfg.mode = CouplingModel::Dispersive;
        else if (m == "jaynes_cummings") cfg.mode = CouplingModel::JaynesCummings;
        else if (m == "both") cfg.both_modes = true;
        else throw ConfigError("mode: expected dispersive | jaynes_cummings | both");
    }
    if (j.contains("sweep")) {
        if (!j["sweep"].is_object()) throw ConfigError("sweep: object expected");
        const std::set<std::string> axes = {"alpha_sq", "t_m_ns", "gamma_j_mhz",
                                            "subtractions", "photon_numbers", "t_d_ns"};
        reject_unknown(j["sweep"], "sweep.", axes);
        for (auto it = j["sweep"].begin(); it != j["sweep"].end(); ++it) {
            if (!it.value().is_array())
                throw ConfigError("sweep." + it.key() + ": explicit value list expected");
            std::vector<double> vals;
            for (const auto& v : it.value()) {
                if (!v.is_number()) throw ConfigError("sweep." + it.key() + ": numeric values only");
                vals.push_back(v.get<double>());
            }
            cfg.sweep[it.key()] = std::move(vals);
        }
    }
    if (j.contains("initial_qubit")) cfg.initial_qubit = j["initial_qubit"].get<std::string>();
    if (j.contains("reset_between")) {
        if (!j["reset_between"].is_boolean()) throw ConfigError("reset_between: boolean expected");
        cfg.reset_between = j["reset_between"].get<bool>();
    }
    if (j.contains("integrator")) {
        const json& ji = j["integrator"];
        reject_unknown(ji, "integrator.", {"method", "dt_ps", "record_stride", "rel_tol", "abs_tol"});
        if (ji.contains("method")) {
            const std::string m = ji["method"].get<std::string>();
            if (m == "rk4_fixed") cfg.integrator.method = IntegratorMethod::Rk4Fixed;
            else if (m == "rk45_adaptive") cfg.integrator.method = IntegratorMethod::Rk45Adaptive;
            else throw ConfigError("integrator.method: expected rk4_fixed | rk45_adaptive");
        }
        if (ji.contains("dt_ps")) cfg.integrator.dt = ji["dt_ps"].get<double>() * 1e-12;
        if (ji.contains("record_stride")) {
            cfg.integrator.record_stride = ji["record_stride"].get<int>();
            if (cfg.integrator.record_stride < 0)
                throw ConfigError("integrator.record_stride: must be >= 0 (0 = auto)");
        }
        if (ji.contains("rel_tol")) cfg.integrator.rel_tol = ji["rel_tol"].get<double>();
        if (ji.contains("abs_tol")) cfg.integrator.abs_tol = ji["abs_tol"].get<double>();
    }
    if (j.contains("output")) {
        const json& jo = j["output"];
        reject_unknown(jo, "output.", {"path", "format"});
        if (jo.contains("path")) cfg.output_path = jo["path"].get<std::string>();
        if (jo.contains("format")) {
            const std::string f = jo["format"].get<std::string>();
            if (f == "csv") cfg.output_format = OutputFormat::Csv;
            else if (f == "json") cfg.output_format = OutputFormat::Json;
            else throw ConfigError("output.format: expected csv | json");
        }
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<unsigned>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved_entries() const {
    std::vector<std::pair<std::string, std::string>> e;
    e.emplace_back("experiment", to_string(experiment));
    e.emplace_back("mode", both_modes ? "both"
                                      : (mode == CouplingModel::Dispersive ? "dispersive"
                                                                           : "jaynes_cummings"));
    e.emplace_back("omega_c_rad_s", fmt17(params.omega_c));
    e.emplace_back("omega_q_rad_s", fmt17(params.omega_q));
    e.emplace_back("omega_j_idle_rad_s", fmt17(params.omega_j_idle));
    e.emplace_back("omega_j_meas_rad_s", fmt17(params.omega_j_meas));
    e.emplace_back("g_q_rad_s", fmt17(params.g_q));
    e.emplace_back("g_j_rad_s", fmt17(params.g_j));
    e.emplace_back("chi_q_rad_s", fmt17(params.chi_q()));
    e.emplace_back("chi_j_rad_s", fmt17(params.chi_j()));
    e.emplace_back("gamma_j_per_s", fmt17(params.gamma_j));
    e.emplace_back("gamma_d_per_s", fmt17(params.gamma_d));
    e.emplace_back("gamma_r_per_s", fmt17(params.gamma_r));
    e.emplace_back("kappa_per_s", fmt17(params.kappa));
    e.emplace_back("cavity_decay", params.cavity_decay ? "true" : "false");
    e.emplace_back("drive_amp_rad_s", fmt17(params.drive_amp));
    e.emplace_back("drive_phase_rad", fmt17(params.drive_phase));
    e.emplace_back("t_drive_s", fmt17(params.t_drive));
    e.emplace_back("t_measure_s", fmt17(params.t_measure));
    e.emplace_back("t_reset_s", fmt17(params.t_reset));
    e.emplace_back("initial_qubit", initial_qubit);
    e.emplace_back("reset_between", reset_between ? "true" : "false");
    e.emplace_back("integrator_method",
                   integrator.method == IntegratorMethod::Rk4Fixed ? "rk4_fixed" : "rk45_adaptive");
    e.emplace_back("integrator_dt_s", fmt17(integrator.dt));
    e.emplace_back("record_stride", std::to_string(integrator.record_stride));
    e.emplace_back("seed", std::to_string(seed));
    for (const auto& [name, vals] : sweep) {
        std::string list;
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i) list += ",";
            list += fmt17(vals[i]);
        }
        e.emplace_back("sweep_" + name, list);
    }
    return e;
}

std::string default_config_text() {
    const SystemParams p = SystemParams::defaults();
    json j;
    j["experiment"] = "contrast_vs_time";
    const double MHz = 2.0 * kPi * 1e6;
    auto freq = [&](double rad_s) {
        return json{{"value", rad_s / MHz}, {"unit", "MHz_over_2pi"}};
    };
    auto rate = [&](double per_s) { return json{{"value", per_s / 1e6}, {"unit", "MHz_rate"}}; };
    auto time_ns = [&](double s) { return json{{"value", s * 1e9}, {"unit", "ns"}}; };
    j["params"] = {
        {"omega_c", freq(p.omega_c)},
        {"omega_q", freq(p.omega_q)},
        {"omega_j_idle", freq(p.omega_j_idle)},
        {"omega_j_meas", freq(p.omega_j_meas)},
        {"g_q", freq(p.g_q)},
        {"g_j", freq(p.g_j)},
        {"gamma_j", rate(p.gamma_j)},
        {"gamma_d", rate(p.gamma_d)},
        {"gamma_r", rate(p.gamma_r)},
        {"kappa", rate(p.kappa)},
        {"cavity_decay", p.cavity_decay},
        {"drive_amp", freq(p.drive_amp)},
        {"drive_phase_rad", p.drive_phase},
        {"t_drive", time_ns(p.t_drive)},
        {"t_measure", time_ns(p.t_measure)},
        {"t_reset", time_ns(p.t_reset)},
    };
    j["mode"] = "dispersive";
    j["sweep"] = {{"t_m_ns", json::array()}};
    for (int k = 0; k <= 40; ++k) j["sweep"]["t_m_ns"].push_back(2.5 * k);
    j["initial_qubit"] = "one";
    j["reset_between"] = true;
    j["integrator"] = {{"method", "rk4_fixed"}, {"dt_ps", 1.0}, {"record_stride", 0}};
    j["output"] = {{"path", "out.csv"}, {"format", "csv"}};
    j["seed"] = 0;
    j["workers"] = 0;
    return j.dump(2) + "\n";
}

} // namespace jpm
