#ifndef JPM_CONFIG_HPP
#define JPM_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "jpm/protocol.hpp"

namespace jpm {

enum class ExperimentKind {
    DriveTrace,
    DetectionSurface,
    ContrastVsTime,
    ContrastVsRate,
    ResetErrorCurve,
    FidelityVsTime,
    Lifetimes,
    QndRepeat,
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

enum class OutputFormat { Csv, Json };

/// Parsed and validated experiment description. Frequencies and rates in
/// the file carry per-key unit tags (MHz_over_2pi, MHz_over_pi, MHz_rate,
/// ns); everything here is already converted to rad/s, 1/s and seconds.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::ContrastVsTime;
    SystemParams params = SystemParams::defaults();
    CouplingModel mode = CouplingModel::Dispersive;
    bool both_modes = false; // fidelity_vs_time compares the two couplings

    std::map<std::string, std::vector<double>> sweep; // named explicit value lists

    std::string initial_qubit = "one"; // zero | one | plus
    bool reset_between = true;

    IntegratorConfig integrator;

    std::string output_path = "out.csv";
    OutputFormat output_format = OutputFormat::Csv;

    unsigned seed = 0; // reserved; all computations are deterministic
    int workers = 0;   // 0 = SIM_WORKERS env or hardware concurrency

    /// Experiment-specific requirements (named sweep axes present and
    /// non-empty). Throws ConfigError naming the offending key.
    void validate() const;

    const std::vector<double>& axis(const std::string& name) const;

    /// Echo of the resolved configuration in internal units, as ordered
    /// key/value pairs for output headers.
    std::vector<std::pair<std::string, std::string>> resolved_entries() const;
};

/// Parse a config file (JSON). Unknown keys are rejected with their path;
/// unit tags are mandatory on every frequency/rate/time key.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Default configuration as a JSON document (the print-defaults output).
std::string default_config_text();

} // namespace jpm

#endif
