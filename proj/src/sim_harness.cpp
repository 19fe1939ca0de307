#include "critscore/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "critscore/chi_square.hpp"
#include "critscore/errors.hpp"
#include "critscore/inference.hpp"
#include "critscore/parallel.hpp"
#include "critscore/rng.hpp"

namespace critscore {

using nlohmann::json;

void SimConfig::validate() const {
    if (model != "lmm-slope") throw Error("sim: unknown model id '" + model + "'");
    if (n < 1 || r < 1) throw Error("sim: n and r must be >= 1");
    if (replications < 1) throw Error("sim: replication count must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw Error("sim: level must be in (0, 1)");
    if (lambda_grid.empty()) throw Error("sim: lambda_grid is empty");
    for (const auto& l : lambda_grid)
        if (l[0] < 0.0 || l[1] < 0.0) throw Error("sim: lambda values must be >= 0");
    if (!(sigma > 0.0)) throw Error("sim: sigma must be > 0");
    if (statistics.empty()) throw Error("sim: no statistics requested");
    for (const auto& s : statistics) {
        if (s != "score" && s != "wald" && s != "lrt")
            throw Error("sim: unknown statistic '" + s + "'");
        if (!sigma_known && s != "score")
            throw Error("sim: only the score statistic supports unknown sigma");
    }
    if (mode != "coverage" && mode != "power" && mode != "qq")
        throw Error("sim: mode must be coverage, power, or qq");
    if (mode == "power" && !null_lambda) throw Error("sim: power mode needs null_lambda");
}

SimConfig SimConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    SimConfig c;
    c.model = j.value("model", c.model);
    c.n = j.value("n", c.n);
    c.r = j.value("r", c.r);
    if (j.contains("lambda_grid"))
        for (const auto& l : j.at("lambda_grid"))
            c.lambda_grid.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
    if (j.contains("psi")) c.psi = {j["psi"].at(0).get<double>(), j["psi"].at(1).get<double>()};
    c.sigma = j.value("sigma", c.sigma);
    c.replications = j.value("replications", c.replications);
    c.level = j.value("level", c.level);
    c.seed = j.value("seed", c.seed);
    if (j.contains("statistics")) c.statistics = j["statistics"].get<std::vector<std::string>>();
    c.mode = j.value("mode", c.mode);
    if (j.contains("null_lambda"))
        c.null_lambda = {{j["null_lambda"].at(0).get<double>(), j["null_lambda"].at(1).get<double>()}};
    c.psi_known = j.value("psi_known", c.psi_known);
    c.sigma_known = j.value("sigma_known", c.sigma_known);
    c.threads = j.value("threads", c.threads);
    c.out = j.value("out", c.out);
    c.validate();
    return c;
}

std::string SimConfig::to_json() const {
    json j;
    j["model"] = model;
    j["n"] = n;
    j["r"] = r;
    j["lambda_grid"] = lambda_grid;
    j["psi"] = psi;
    j["sigma"] = sigma;
    j["replications"] = replications;
    j["level"] = level;
    j["seed"] = seed;
    j["statistics"] = statistics;
    j["mode"] = mode;
    if (null_lambda) j["null_lambda"] = *null_lambda;
    j["psi_known"] = psi_known;
    j["sigma_known"] = sigma_known;
    j["threads"] = threads;
    j["out"] = out;
    return j.dump(2);
}

GroupedDataset gen_sim_data(const SimConfig& config, int rep_index) {
    GroupedDataset data;
    data.scale_map = {0, 1};
    data.groups.resize(config.n);
    const Eigen::Vector2d psi(config.psi[0], config.psi[1]);
    for (int i = 0; i < config.n; ++i) {
        // One stream per (rep, group); the random inputs do not depend on
        // lambda, which only scales the effects.
        RngStream rng(config.seed, (static_cast<std::uint64_t>(rep_index) << 24) ^
                                       static_cast<std::uint64_t>(i));
        auto& g = data.groups[i];
        g.X.resize(config.r, 2);
        for (int t = 0; t < config.r; ++t) {
            g.X(t, 0) = 1.0;
            g.X(t, 1) = rng.uniform(-1.0, 2.0);
        }
        g.Z = g.X;
        const double u1 = config.lambda_true[0] * rng.normal();
        const double u2 = config.lambda_true[1] * rng.normal();
        g.y.resize(config.r);
        for (int t = 0; t < config.r; ++t)
            g.y[t] = psi[0] + psi[1] * g.X(t, 1) + u1 + u2 * g.X(t, 1) +
                     config.sigma * rng.normal();
    }
    return data;
}

namespace {

double sample_quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

struct RepOutcome {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool converged = true;
};

// Everything computed for one (lambda point, replication) pair.
struct RepRow {
    std::map<std::string, RepOutcome> by_statistic;
};

bool wants(const SimConfig& c, const std::string& s) {
    return std::find(c.statistics.begin(), c.statistics.end(), s) != c.statistics.end();
}

// Evaluate the requested statistics for the data of `rep` generated under
// `lambda_true`, testing the value `lambda_test`.
RepRow evaluate_rep(const SimConfig& config, const std::array<double, 2>& lambda_true,
                    const std::array<double, 2>& lambda_test, int rep) {
    SimConfig gen = config;
    gen.lambda_true = lambda_true;
    const GroupedDataset data = gen_sim_data(gen, rep);
    RepRow row;
    const Eigen::Vector2d lam_test(lambda_test[0], lambda_test[1]);

    if (wants(config, "score")) {
        RepOutcome out;
        const Eigen::VectorXd psi_true = Eigen::Vector2d(config.psi[0], config.psi[1]);
        if (config.sigma_known) {
            LmmModel model(data, config.sigma);
            const Eigen::VectorXd psi_hat = config.psi_known ? psi_true : model.ols();
            out.value = model.statistic_lambda(lam_test, psi_hat).statistic;
        } else {
            LmmModel model(data);
            const Eigen::VectorXd psi_hat = config.psi_known ? psi_true : model.ols();
            ParameterPoint theta(lam_test, psi_hat, config.sigma);
            const int sigma_index = model.layout().dim() - 1;
            out.value = subvector_statistic(model, theta, {0, 1, sigma_index}).statistic;
        }
        row.by_statistic["score"] = out;
    }

    if (wants(config, "wald") || wants(config, "lrt")) {
        LmmModel model(data, config.sigma);
        const LmmFit fit = model.mle();
        if (wants(config, "wald")) {
            RepOutcome out;
            out.converged = fit.converged;
            out.value = model.wald(lam_test, fit).statistic;
            row.by_statistic["wald"] = out;
        }
        if (wants(config, "lrt")) {
            RepOutcome out;
            out.converged = fit.converged;
            out.value = model.lrt(lam_test, fit);
            row.by_statistic["lrt"] = out;
        }
    }
    return row;
}

int score_df(const SimConfig& config) { return config.sigma_known ? 2 : 3; }

SimResult run_cells(const SimConfig& config, bool keep_raw, bool power_mode) {
    config.validate();
    SimResult result;
    const double q_score = chisq_quantile(score_df(config), config.level);
    const double q_competitor = chisq_quantile(2, config.level);

    for (const auto& lambda_true : config.lambda_grid) {
        const std::array<double, 2> lambda_test =
            power_mode ? *config.null_lambda : lambda_true;
        std::vector<RepRow> rows(config.replications);
        parallel_for(
            config.replications,
            [&](std::size_t rep) {
                rows[rep] =
                    evaluate_rep(config, lambda_true, lambda_test, static_cast<int>(rep));
            },
            config.threads);

        for (const auto& stat : config.statistics) {
            const double q = stat == "score" ? q_score : q_competitor;
            SimCell cell;
            cell.lambda1 = lambda_true[0];
            cell.lambda2 = lambda_true[1];
            cell.statistic = stat;
            cell.quantile = q;
            cell.df = stat == "score" ? score_df(config) : 2;
            std::vector<double> included;
            int covered = 0;
            for (int rep = 0; rep < config.replications; ++rep) {
                const RepOutcome& out = rows[rep].by_statistic.at(stat);
                const bool cov = out.value <= q;
                if (keep_raw) {
                    result.raw.push_back({rep, lambda_true[0], lambda_true[1], stat, out.value,
                                          cov ? 1 : 0, out.converged ? 1 : 0});
                }
                if (!out.converged) {
                    ++cell.excluded;
                    continue;
                }
                included.push_back(out.value);
                if (cov) ++covered;
            }
            cell.reps = static_cast<int>(included.size());
            if (cell.reps > 0) {
                cell.coverage = static_cast<double>(covered) / cell.reps;
                cell.mc_se = std::sqrt(cell.coverage * (1.0 - cell.coverage) / cell.reps);
                cell.mean_statistic =
                    std::accumulate(included.begin(), included.end(), 0.0) / cell.reps;
                cell.q50 = sample_quantile(included, 0.50);
                cell.q80 = sample_quantile(included, 0.80);
                cell.q95 = sample_quantile(included, 0.95);
            }
            result.cells.push_back(std::move(cell));
        }
    }

    if (power_mode) {
        // Trend diagnostic: rejection should not decrease as the truth moves
        // away from the null along the grid.
        for (const auto& stat : config.statistics) {
            bool monotone = true;
            double prev = -1.0;
            for (const auto& cell : result.cells) {
                if (cell.statistic != stat) continue;
                const double rejection = 1.0 - cell.coverage;
                if (rejection + 1e-12 < prev) monotone = false;
                prev = rejection;
            }
            result.power_monotone[stat] = monotone;
        }
    }
    return result;
}

}  // namespace

SimResult run_coverage(const SimConfig& config, bool keep_raw) {
    if (config.mode == "power") throw Error("run_coverage called with a power-mode config");
    return run_cells(config, keep_raw, false);
}

SimResult run_power(const SimConfig& config, const std::array<double, 2>& null_lambda,
                    bool keep_raw) {
    SimConfig c = config;
    c.mode = "power";
    c.null_lambda = null_lambda;
    return run_cells(c, keep_raw, true);
}

std::vector<QqRow> run_qq(const SimConfig& config) {
    const SimResult res = run_cells(config, /*keep_raw=*/true, false);
    std::vector<QqRow> rows;
    // Group raw values per (lambda, statistic).
    for (const auto& cell : res.cells) {
        std::vector<double> values;
        for (const auto& rec : res.raw) {
            if (rec.statistic == cell.statistic && rec.lambda1 == cell.lambda1 &&
                rec.lambda2 == cell.lambda2 && rec.converged)
                values.push_back(rec.value);
        }
        for (int i = 1; i <= 99; ++i) {
            const double p = i / 100.0;
            QqRow row;
            row.lambda1 = cell.lambda1;
            row.lambda2 = cell.lambda2;
            row.statistic = cell.statistic;
            row.p = p;
            row.theoretical = chisq_quantile(cell.df, p);
            row.sample = sample_quantile(values, p);
            rows.push_back(row);
        }
    }
    return rows;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string coverage_csv(const SimResult& result) {
    std::ostringstream os;
    os << "lambda1,lambda2,statistic,coverage,mc_se,reps,excluded\n";
    for (const auto& c : result.cells)
        os << format_g17(c.lambda1) << ',' << format_g17(c.lambda2) << ',' << c.statistic << ','
           << format_g17(c.coverage) << ',' << format_g17(c.mc_se) << ',' << c.reps << ','
           << c.excluded << '\n';
    return os.str();
}

std::string power_csv(const SimResult& result) {
    std::ostringstream os;
    os << "lambda1,lambda2,statistic,rejection,mc_se,reps,excluded\n";
    for (const auto& c : result.cells)
        os << format_g17(c.lambda1) << ',' << format_g17(c.lambda2) << ',' << c.statistic << ','
           << format_g17(1.0 - c.coverage) << ',' << format_g17(c.mc_se) << ',' << c.reps << ','
           << c.excluded << '\n';
    return os.str();
}

std::string raw_csv(const SimResult& result) {
    std::ostringstream os;
    os << "rep,lambda1,lambda2,statistic,value,covered,converged\n";
    for (const auto& r : result.raw)
        os << r.rep << ',' << format_g17(r.lambda1) << ',' << format_g17(r.lambda2) << ','
           << r.statistic << ',' << format_g17(r.value) << ',' << r.covered << ',' << r.converged
           << '\n';
    return os.str();
}

std::string qq_csv(const std::vector<QqRow>& rows) {
    std::ostringstream os;
    os << "lambda1,lambda2,statistic,p,theoretical,sample\n";
    for (const auto& r : rows)
        os << format_g17(r.lambda1) << ',' << format_g17(r.lambda2) << ',' << r.statistic << ','
           << format_g17(r.p) << ',' << format_g17(r.theoretical) << ',' << format_g17(r.sample)
           << '\n';
    return os.str();
}

}  // namespace critscore
