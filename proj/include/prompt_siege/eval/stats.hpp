#pragma once

#include <Eigen/Dense>

#include "prompt_siege/core/types.hpp"

namespace prompt_siege {

/// Sample mean and unbiased covariance of a feature set (n >= 2).
struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::size_t n = 0;

    GaussianStats(Eigen::VectorXd mean_, Eigen::MatrixXd cov_, std::size_t n_)
        : mean(std::move(mean_)), cov(std::move(cov_)), n(n_) {
        if (n < 2) throw ValidationError("gaussian stats need n ≥ 2");
        if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
            throw ValidationError("covariance shape does not match the mean");
        }
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw ValidationError("covariance is not symmetric");
    }

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

namespace detail {

inline Eigen::MatrixXd feature_matrix(const std::vector<FeatureVector>& features) {
    if (features.empty()) throw ValidationError("no feature vectors");
    const auto d = static_cast<Eigen::Index>(features.front().dim());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(features.size()), d);
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (static_cast<Eigen::Index>(features[i].dim()) != d) throw ValidationError("feature dimensions differ");
        if (features[i].space() != features.front().space()) throw ValidationError("feature spaces differ");
        for (Eigen::Index j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), j) = features[i][static_cast<std::size_t>(j)];
    }
    return X;
}

}  // namespace detail

inline GaussianStats gaussian_stats(const std::vector<FeatureVector>& features) {
    if (features.size() < 2) throw ValidationError("gaussian stats need n ≥ 2");
    const Eigen::MatrixXd X = detail::feature_matrix(features);
    const Eigen::VectorXd mean = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
    cov = (cov + cov.transpose()) / 2;
    return {mean, cov, features.size()};
}

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((m + m.transpose()) / 2);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Tr((A B)^{1/2}) through the similar symmetric matrix A^{1/2} B A^{1/2}.
// Returns nullopt when that matrix has an eigenvalue below -1e-8.
inline std::optional<double> trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd ra = psd_sqrt(a);
    const Eigen::MatrixXd s = ra * b * ra;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((s + s.transpose()) / 2, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) return std::nullopt;
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

/// Fréchet distance from raw moments; also used for the single-sample case
/// where the covariance is taken as zero.
inline double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                               const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b) {
    if (mu_a.size() != mu_b.size()) {
        throw ValidationError("dimension mismatch: " + std::to_string(mu_a.size()) + " vs " +
                              std::to_string(mu_b.size()));
    }
    Eigen::MatrixXd a = cov_a, b = cov_b;
    auto tr = trace_sqrt_product(a, b);
    if (!tr) {
        const auto I = Eigen::MatrixXd::Identity(a.rows(), a.cols());
        a += 1e-6 * I;
        b += 1e-6 * I;
        tr = trace_sqrt_product(a, b);
        if (!tr) throw ValidationError("covariance product is not positive semi-definite");
    }
    const double mean_term = (mu_a - mu_b).squaredNorm();
    double trace_term = a.trace() + b.trace() - 2 * *tr;
    if (trace_term < 0 && trace_term >= -1e-6) trace_term = 0;
    return std::max(0.0, mean_term + trace_term);
}

}  // namespace detail

inline double fid(const GaussianStats& a, const GaussianStats& b) {
    if (a.n < 2 || b.n < 2) throw ValidationError("gaussian stats need n ≥ 2");
    return detail::frechet_distance(a.mean, a.cov, b.mean, b.cov);
}

}  // namespace prompt_siege
