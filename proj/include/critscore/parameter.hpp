#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "critscore/errors.hpp"

namespace critscore {

/// Which block of the partitioned parameter a flat index belongs to.
enum class Block { Scale, Free, ErrorScale };

/// Shape of a partitioned parameter vector: d1 scale parameters (each >= 0),
/// d2 free parameters, and optionally a positive error scale appended last.
/// Flat ordering is (lambda..., psi..., sigma).
struct ParameterLayout {
    int n_scale = 0;
    int n_free = 0;
    bool has_error_scale = false;

    int dim() const { return n_scale + n_free + (has_error_scale ? 1 : 0); }

    Block block_of(int flat) const {
        if (flat < n_scale) return Block::Scale;
        if (flat < n_scale + n_free) return Block::Free;
        return Block::ErrorScale;
    }

    int within_block(int flat) const {
        switch (block_of(flat)) {
            case Block::Scale: return flat;
            case Block::Free: return flat - n_scale;
            default: return 0;
        }
    }

    int flat_index(Block b, int within) const {
        switch (b) {
            case Block::Scale: return within;
            case Block::Free: return n_scale + within;
            default: return n_scale + n_free;
        }
    }

    std::string label(int flat) const {
        switch (block_of(flat)) {
            case Block::Scale: return "lambda" + std::to_string(within_block(flat) + 1);
            case Block::Free: return "psi" + std::to_string(within_block(flat) + 1);
            default: return "sigma";
        }
    }

    bool operator==(const ParameterLayout&) const = default;
};

/// A point theta = (lambda, psi[, sigma]) in the partitioned parameter set.
struct ParameterPoint {
    Eigen::VectorXd lambda;
    Eigen::VectorXd psi;
    std::optional<double> sigma;

    ParameterPoint() = default;
    ParameterPoint(Eigen::VectorXd lambda_, Eigen::VectorXd psi_,
                   std::optional<double> sigma_ = std::nullopt)
        : lambda(std::move(lambda_)), psi(std::move(psi_)), sigma(sigma_) {}

    ParameterLayout layout() const {
        return {static_cast<int>(lambda.size()), static_cast<int>(psi.size()), sigma.has_value()};
    }

    int dim() const { return layout().dim(); }

    double flat(int j) const {
        const auto lay = layout();
        switch (lay.block_of(j)) {
            case Block::Scale: return lambda[j];
            case Block::Free: return psi[j - lay.n_scale];
            default: return *sigma;
        }
    }

    void set_flat(int j, double v) {
        const auto lay = layout();
        switch (lay.block_of(j)) {
            case Block::Scale: lambda[j] = v; break;
            case Block::Free: psi[j - lay.n_scale] = v; break;
            default: sigma = v; break;
        }
    }

    Eigen::VectorXd to_flat() const {
        Eigen::VectorXd out(dim());
        for (int j = 0; j < dim(); ++j) out[j] = flat(j);
        return out;
    }

    static ParameterPoint from_flat(const ParameterLayout& lay, const Eigen::VectorXd& v) {
        ParameterPoint p;
        p.lambda = v.head(lay.n_scale);
        p.psi = v.segment(lay.n_scale, lay.n_free);
        if (lay.has_error_scale) p.sigma = v[lay.dim() - 1];
        return p;
    }

    /// Domain check: every lambda >= 0, sigma (when present) > 0.
    void validate() const {
        for (int j = 0; j < lambda.size(); ++j)
            if (!(lambda[j] >= 0.0))
                throw std::domain_error("scale parameter lambda" + std::to_string(j + 1) +
                                        " must be >= 0");
        if (sigma && !(*sigma > 0.0)) throw std::domain_error("sigma must be > 0");
    }
};

/// Derivative orders used to build the modified score: k_j = 2 replaces the
/// j-th score entry by the second partial derivative of the log-likelihood
/// (only ever done for scale parameters), k_j = 1 keeps the score.
struct CriticalPattern {
    std::vector<int> k;
    bool standard_basis = true;
    std::optional<Eigen::MatrixXd> basis;  // orthonormal columns when !standard_basis

    std::vector<int> critical_indices() const {
        std::vector<int> idx;
        for (int j = 0; j < static_cast<int>(k.size()); ++j)
            if (k[j] == 2) idx.push_back(j);
        return idx;
    }

    bool any_critical() const {
        for (int kj : k)
            if (kj == 2) return true;
        return false;
    }
};

/// Pattern rule: k_j = 2 for scale indices with lambda_j <= zero_tol, else 1.
/// The default zero_tol = 0 switches branches only at exact zeros; the
/// extension is continuous so either branch is valid near the boundary.
CriticalPattern critical_pattern(const ParameterPoint& theta, double zero_tol = 0.0);

}  // namespace critscore
