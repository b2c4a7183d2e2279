#include "labelscout/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "labelscout/error.hpp"

namespace labelscout {

EmbeddingMatrix to_matrix(const std::vector<EmbeddingVector>& rows) {
    if (rows.empty()) return {};
    const std::size_t d = rows.front().dim();
    EmbeddingMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].dim() != d) throw ShapeError("ragged embedding rows");
        for (std::size_t j = 0; j < d; ++j) {
            const double v = rows[i].values[j];
            if (!std::isfinite(v)) throw DataError("non-finite embedding value");
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return x;
}

std::string_view to_string(Reducer r) {
    switch (r) {
        case Reducer::pca: return "pca";
        case Reducer::identity: return "identity";
        case Reducer::external: return "external";
    }
    return "?";
}

Reducer reducer_from_string(std::string_view s) {
    if (s == "pca") return Reducer::pca;
    if (s == "identity") return Reducer::identity;
    if (s == "external") return Reducer::external;
    throw ConfigError("unknown reducer \"" + std::string(s) + "\"");
}

ReducedMatrix reduce_pca(const EmbeddingMatrix& x, std::size_t target_dim) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (target_dim < 1 || static_cast<Eigen::Index>(target_dim) > d)
        throw ConfigError("PCA target dimension " + std::to_string(target_dim) + " outside [1, " +
                          std::to_string(d) + "]");
    if (n < 2 || static_cast<Eigen::Index>(target_dim) > n)
        throw ConfigError("PCA needs at least max(2, target_dim) rows, got " + std::to_string(n));

    ReducedMatrix out;
    out.reducer = Reducer::pca;
    out.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - out.mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    if (cov.trace() <= 0.0) throw DataError("degenerate input: zero variance");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("PCA eigen-decomposition failed");
    // Eigen returns ascending order.
    out.eigenvalues = solver.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

    const auto r = static_cast<Eigen::Index>(target_dim);
    out.components = vectors.leftCols(r);
    for (Eigen::Index k = 0; k < r; ++k) {
        Eigen::Index arg = 0;
        out.components.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.components(arg, k) < 0.0) out.components.col(k) *= -1.0;
    }
    out.values = centered * out.components;
    return out;
}

ReducedMatrix reduce_identity(const EmbeddingMatrix& x) {
    ReducedMatrix out;
    out.reducer = Reducer::identity;
    out.values = x;
    return out;
}

ReducedMatrix load_external(const std::filesystem::path& path, std::size_t expected_rows) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open external reduction " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<double> row;
        std::string tok;
        while (ss >> tok) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError("not a real number: \"" + tok + "\"", line_no);
            }
            if (!std::isfinite(row.back())) throw ParseError("non-finite value", line_no);
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()),
                             line_no);
        rows.push_back(std::move(row));
    }
    if (rows.size() != expected_rows)
        throw ShapeError("external reduction has " + std::to_string(rows.size()) + " rows, expected " +
                         std::to_string(expected_rows));
    ReducedMatrix out;
    out.reducer = Reducer::external;
    if (rows.empty()) return out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return out;
}

ReducedMatrix reduce(const EmbeddingMatrix& x, std::size_t target_dim, Reducer reducer,
                     const std::filesystem::path& external_path) {
    switch (reducer) {
        case Reducer::pca: return reduce_pca(x, target_dim);
        case Reducer::identity: return reduce_identity(x);
        case Reducer::external: return load_external(external_path, static_cast<std::size_t>(x.rows()));
    }
    throw ConfigError("unknown reducer");
}

// ---------------------------------------------------------------------------
// Gaussian mixture

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Row-wise log(w_k) + log N(z_i | mu_k, diag var_k).
Eigen::MatrixXd weighted_log_density(const MixtureModel& m, const Eigen::MatrixXd& z) {
    const auto n = z.rows();
    const auto k = static_cast<Eigen::Index>(m.components);
    Eigen::MatrixXd out(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const double logw = m.weights(c) > 0.0 ? std::log(m.weights(c)) : -std::numeric_limits<double>::infinity();
        const Eigen::RowVectorXd var = m.variances.row(c);
        const double log_norm = -0.5 * (static_cast<double>(z.cols()) * kLog2Pi + var.array().log().sum());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double maha = ((z.row(i) - m.means.row(c)).array().square() / var.array()).sum();
            out(i, c) = logw + log_norm - 0.5 * maha;
        }
    }
    return out;
}

/// Fills `resp` with normalized posteriors and returns the total log-likelihood.
/// Rows are reduced in index order so the sum is reproducible.
double e_step(const MixtureModel& m, const Eigen::MatrixXd& z, Eigen::MatrixXd& resp) {
    const Eigen::MatrixXd logp = weighted_log_density(m, z);
    resp.resize(logp.rows(), logp.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
        const double mx = logp.row(i).maxCoeff();
        double s = 0.0;
        for (Eigen::Index c = 0; c < logp.cols(); ++c) s += std::exp(logp(i, c) - mx);
        const double lse = mx + std::log(s);
        for (Eigen::Index c = 0; c < logp.cols(); ++c) resp(i, c) = std::exp(logp(i, c) - lse);
        total += lse;
    }
    return total;
}

void m_step(MixtureModel& m, const Eigen::MatrixXd& z, const Eigen::MatrixXd& resp, double floor) {
    const auto n = static_cast<double>(z.rows());
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(m.components); ++c) {
        if (nk(c) <= 1e-300) {
            m.weights(c) = 0.0;  // keep the previous mean/variance; they carry no mass
            continue;
        }
        m.weights(c) = nk(c) / n;
        const Eigen::RowVectorXd mean = (resp.col(c).transpose() * z) / nk(c);
        const Eigen::MatrixXd diff = z.rowwise() - mean;
        Eigen::RowVectorXd var = (resp.col(c).transpose() * diff.array().square().matrix()) / nk(c);
        m.means.row(c) = mean;
        m.variances.row(c) = var.array().max(floor).matrix();
    }
    m.weights /= m.weights.sum();
}

std::vector<Eigen::Index> kmeans_pp(const Eigen::MatrixXd& z, std::size_t k, std::mt19937_64& rng) {
    const auto n = z.rows();
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(std::min<double>(uniform01(rng) * static_cast<double>(n),
                                                                 static_cast<double>(n - 1))));
    Eigen::VectorXd d2 = (z.rowwise() - z.row(centers[0])).rowwise().squaredNorm();
    while (centers.size() < k) {
        const double total = d2.sum();
        Eigen::Index pick = -1;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (d2(i) > 0.0 && acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) {
                for (Eigen::Index i = n - 1; i >= 0; --i) {
                    if (d2(i) > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            // Fewer distinct points than components: take the first unused row.
            for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
                if (std::find(centers.begin(), centers.end(), i) == centers.end()) pick = i;
            }
        }
        centers.push_back(pick);
        d2 = d2.cwiseMin((z.rowwise() - z.row(pick)).rowwise().squaredNorm());
    }
    return centers;
}

MixtureModel fit_once(const Eigen::MatrixXd& z, const GmmOptions& opt, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto k = static_cast<Eigen::Index>(opt.components);
    const auto centers = kmeans_pp(z, opt.components, rng);

    MixtureModel m;
    m.components = opt.components;
    m.seed = seed;
    m.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    m.means.resize(k, z.cols());
    for (Eigen::Index c = 0; c < k; ++c) m.means.row(c) = z.row(centers[static_cast<std::size_t>(c)]);
    const Eigen::RowVectorXd mu = z.colwise().mean();
    Eigen::RowVectorXd global_var = (z.rowwise() - mu).array().square().colwise().mean().matrix();
    global_var = global_var.array().max(opt.variance_floor).matrix();
    m.variances = global_var.replicate(k, 1);

    Eigen::MatrixXd resp;
    double ll = e_step(m, z, resp);
    m.log_likelihood_history.push_back(ll);
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        m_step(m, z, resp, opt.variance_floor);
        ++m.iterations;
        const double next = e_step(m, z, resp);
        m.log_likelihood_history.push_back(next);
        const double gain = next - ll;
        ll = next;
        if (gain < opt.tol) {
            m.converged = true;
            break;
        }
    }
    m.log_likelihood = ll;
    return m;
}

}  // namespace

MixtureModel fit_gmm(const Eigen::MatrixXd& z, const GmmOptions& options) {
    if (options.components < 1) throw ConfigError("GMM needs K >= 1");
    if (static_cast<std::size_t>(z.rows()) < options.components)
        throw ConfigError("GMM needs n >= K (n=" + std::to_string(z.rows()) + ", K=" +
                          std::to_string(options.components) + ")");
    if (z.cols() < 1) throw ShapeError("GMM input has no columns");
    if (!z.allFinite()) throw DataError("GMM input has non-finite values");
    if (((z.rowwise() - z.row(0)).cwiseAbs().maxCoeff()) == 0.0)
        throw DataError("degenerate fit: all points identical");

    MixtureModel best;
    bool have = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
        MixtureModel m = fit_once(z, options, options.seed + r);
        if (!have || m.log_likelihood > best.log_likelihood) {
            best = std::move(m);
            have = true;
        }
    }
    return best;
}

double log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& z) {
    Eigen::MatrixXd resp;
    return e_step(model, z, resp);
}

ClusterAssignment assign(const MixtureModel& model, const Eigen::MatrixXd& z) {
    if (z.cols() != model.means.cols())
        throw ShapeError("assign: data has " + std::to_string(z.cols()) + " columns, model has " +
                         std::to_string(model.means.cols()));
    ClusterAssignment out;
    e_step(model, z, out.responsibilities);
    out.labels.resize(static_cast<std::size_t>(z.rows()));
    out.members.assign(model.components, {});
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < out.responsibilities.cols(); ++c) {
            if (out.responsibilities(i, c) > out.responsibilities(i, best)) best = c;
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        out.members[static_cast<std::size_t>(best)].push_back(static_cast<std::size_t>(i));
    }
    return out;
}

std::vector<std::size_t> nearest_members(const ClusterAssignment& assignment, const MixtureModel& model,
                                         const Eigen::MatrixXd& z, std::size_t cluster, std::size_t m) {
    if (m < 1) throw ConfigError("nearest_members needs m >= 1");
    if (cluster >= assignment.members.size()) throw ConfigError("cluster id out of range");
    const auto& members = assignment.members[cluster];
    if (members.empty()) throw StateError("cluster " + std::to_string(cluster) + " is empty");

    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(members.size());
    for (std::size_t row : members) {
        const double d = (z.row(static_cast<Eigen::Index>(row)) - model.means.row(static_cast<Eigen::Index>(cluster)))
                             .norm();
        ranked.emplace_back(d, row);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(m, ranked.size()); ++i) out.push_back(ranked[i].second);
    return out;
}

std::size_t choose_k(std::optional<long long> hint, std::size_t unique_keyphrases) {
    if (hint) {
        if (*hint < 1) throw ConfigError("cluster count hint must be >= 1");
        return static_cast<std::size_t>(*hint);
    }
    const auto k = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(unique_keyphrases))));
    return static_cast<std::size_t>(std::clamp<long long>(k, 5, 300));
}

}  // namespace labelscout
