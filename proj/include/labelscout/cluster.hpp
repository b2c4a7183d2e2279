#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "labelscout/gateway.hpp"

namespace labelscout {

/// n keyphrases x d embedding dimensions, rows in keyphrase-set order.
using EmbeddingMatrix = Eigen::MatrixXd;

/// Stacks embeddings into a matrix. Throws DataError on ragged or non-finite input.
EmbeddingMatrix to_matrix(const std::vector<EmbeddingVector>& rows);

enum class Reducer { pca, identity, external };

std::string_view to_string(Reducer r);
Reducer reducer_from_string(std::string_view s);

struct ReducedMatrix {
    Eigen::MatrixXd values;  // n x r
    Reducer reducer = Reducer::identity;
    // PCA only: all eigenvalues of the sample covariance (descending), the
    // retained components (d x r) and the column means.
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd components;
    Eigen::RowVectorXd mean;
};

/// Principal-component projection onto the top `target_dim` axes of the
/// sample covariance. Each axis is sign-fixed so its largest-magnitude
/// loading is positive.
ReducedMatrix reduce_pca(const EmbeddingMatrix& x, std::size_t target_dim);
ReducedMatrix reduce_identity(const EmbeddingMatrix& x);
/// Dense text matrix, one row per line, whitespace-separated reals.
ReducedMatrix load_external(const std::filesystem::path& path, std::size_t expected_rows);

ReducedMatrix reduce(const EmbeddingMatrix& x, std::size_t target_dim, Reducer reducer,
                     const std::filesystem::path& external_path = {});

struct GmmOptions {
    std::size_t components = 1;
    std::uint64_t seed = 0;
    std::size_t max_iter = 200;
    double tol = 1e-6;
    std::size_t restarts = 1;
    double variance_floor = 1e-6;
};

/// Diagonal-covariance Gaussian mixture.
struct MixtureModel {
    std::size_t components = 0;
    Eigen::VectorXd weights;    // K
    Eigen::MatrixXd means;      // K x r
    Eigen::MatrixXd variances;  // K x r, each >= variance floor
    double log_likelihood = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> log_likelihood_history;  // one entry per E-step
    std::size_t iterations = 0;
    bool converged = false;
};

/// EM from k-means++ seeding. Stops when the log-likelihood gain drops
/// below `tol` or after `max_iter` M-steps. With restarts > 1 the fit with
/// the highest final log-likelihood wins (seeds seed, seed+1, ...).
MixtureModel fit_gmm(const Eigen::MatrixXd& z, const GmmOptions& options);

/// Total log-likelihood of `z` under `model`.
double log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& z);

struct ClusterAssignment {
    Eigen::MatrixXd responsibilities;           // n x K, rows sum to 1
    std::vector<std::size_t> labels;            // argmax per row, ties -> lowest index
    std::vector<std::vector<std::size_t>> members;  // per component, ascending row index
};

ClusterAssignment assign(const MixtureModel& model, const Eigen::MatrixXd& z);

/// Up to `m` members of `cluster` closest (Euclidean) to the component mean,
/// ascending by distance, ties by row index.
std::vector<std::size_t> nearest_members(const ClusterAssignment& assignment, const MixtureModel& model,
                                         const Eigen::MatrixXd& z, std::size_t cluster, std::size_t m = 3);

/// `hint` when given, else round(sqrt(unique_keyphrases)) clamped to [5, 300].
std::size_t choose_k(std::optional<long long> hint, std::size_t unique_keyphrases);

}  // namespace labelscout
