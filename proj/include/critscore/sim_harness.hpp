#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "critscore/lmm_model.hpp"

namespace critscore {

/// Configuration for the seeded Monte Carlo experiments on the random
/// intercept + slope design Y_ij = psi1 + psi2 X_ij + U_1i + U_2i X_ij + E_ij
/// with X_ij uniform on [-1, 2].
struct SimConfig {
    std::string model = "lmm-slope";
    int n = 20;
    int r = 10;
    std::vector<std::array<double, 2>> lambda_grid;  // true (lambda1, lambda2) values
    std::array<double, 2> lambda_true = {0.1, 0.1};  // used by gen_sim_data
    std::array<double, 2> psi = {1.0, 1.0};
    double sigma = 1.0;
    int replications = 2000;
    double level = 0.95;
    std::uint64_t seed = 1;
    std::vector<std::string> statistics = {"score", "wald", "lrt"};
    std::string mode = "coverage";  // coverage | power | qq
    std::optional<std::array<double, 2>> null_lambda;
    bool psi_known = false;   // plug in the true psi instead of OLS
    bool sigma_known = true;  // false: score statistic jointly over (lambda, sigma)
    int threads = 0;          // 0: CRITSCORE_THREADS / hardware
    std::string out;

    void validate() const;
    static SimConfig from_json(const std::string& text);
    std::string to_json() const;
};

/// Aggregate for one (lambda, statistic) cell. `coverage` is the fraction of
/// included replications whose statistic fell below the cell's chi-square
/// quantile (in power mode the rejection rate is 1 - coverage).
struct SimCell {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::string statistic;
    double coverage = 0.0;
    double mc_se = 0.0;
    int reps = 0;      // included replications
    int excluded = 0;  // non-converged fits, reported and left out
    double mean_statistic = 0.0;
    double q50 = 0.0, q80 = 0.0, q95 = 0.0;
    double quantile = 0.0;  // threshold the statistics were compared to
    int df = 0;
};

struct RawRecord {
    int rep = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::string statistic;
    double value = 0.0;
    int covered = 0;
    int converged = 1;
};

struct SimResult {
    std::vector<SimCell> cells;
    std::vector<RawRecord> raw;  // populated when keep_raw
    std::map<std::string, bool> power_monotone;  // power mode trend diagnostic
};

struct QqRow {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::string statistic;
    double p = 0.0;
    double theoretical = 0.0;
    double sample = 0.0;
};

/// One replication's dataset; deterministic per (config.seed, rep_index) and
/// shared across lambda values through scaling, so the whole experiment uses
/// common random numbers.
GroupedDataset gen_sim_data(const SimConfig& config, int rep_index);

SimResult run_coverage(const SimConfig& config, bool keep_raw = false);
SimResult run_power(const SimConfig& config, const std::array<double, 2>& null_lambda,
                    bool keep_raw = false);
std::vector<QqRow> run_qq(const SimConfig& config);

// Plot-ready serializations; headers are stable (see README).
std::string coverage_csv(const SimResult& result);
std::string power_csv(const SimResult& result);
std::string raw_csv(const SimResult& result);
std::string qq_csv(const std::vector<QqRow>& rows);

/// %.17g rendering used for every CSV number (bit-exact round trips).
std::string format_g17(double v);

}  // namespace critscore
