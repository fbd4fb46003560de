#ifndef JPM_EXPERIMENTS_HPP
#define JPM_EXPERIMENTS_HPP

#include "jpm/config.hpp"

namespace jpm {

/// Rectangular result table; every experiment documents its column
/// contract in the README and output header.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// Execute the configured experiment and write the output file.
/// Deterministic: identical config produces a bit-identical file.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// One built-in oracle check of `verify`.
struct OracleResult {
    std::string name;
    bool pass;
    double measured;
    std::string detail;
};

/// Built-in oracle suite: closed-form pointer amplitudes vs numerics,
/// the analytic detection model vs simulation, the ideal fidelity vs the
/// Choi pipeline, lifetime formulas, saturation branching and the RK4
/// convergence order.
std::vector<OracleResult> verify(const ExperimentConfig& cfg);

void write_output(const ExperimentConfig& cfg, const ResultTable& table);

} // namespace jpm

#endif
