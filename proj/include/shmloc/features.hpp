#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "shmloc/errors.hpp"
#include "shmloc/linalg.hpp"
#include "shmloc/parallel.hpp"
#include "shmloc/rng.hpp"

namespace shmloc::features {

enum class Split { Train, Validation, Test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

/// Per-feature affine map fitted on the training split only.
struct Normalization {
    Vector min;
    Vector max;

    bool operator==(const Normalization&) const = default;
};

/// Novelty-index feature vectors with class labels and partition tags.
struct FeatureDataset {
    Matrix x;                  // n x d
    std::vector<int> y;        // class labels, 1..9
    std::vector<Split> split;  // per row
    std::vector<std::size_t> rep;  // originating repetition, for bookkeeping
    std::vector<Normalization> normalization;  // empty or one entry

    std::size_t size() const { return y.size(); }

    std::vector<int> classes() const {
        std::set<int> ids(y.begin(), y.end());
        return {ids.begin(), ids.end()};
    }

    /// Rows of one split as a dense matrix plus labels.
    std::pair<Matrix, std::vector<int>> rows(Split which) const {
        std::size_t count = 0;
        for (Split s : split) count += (s == which);
        Matrix out(count, x.cols());
        std::vector<int> labels(count);
        std::size_t r = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (split[i] != which) continue;
            for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = x(i, j);
            labels[r] = y[i];
            ++r;
        }
        return {std::move(out), std::move(labels)};
    }
};

// ---------------------------------------------------------------------------
// Normalization to [-1, 1]
// ---------------------------------------------------------------------------

inline Normalization fit_normalization(const Matrix& x_train) {
    Normalization norm;
    norm.min.assign(x_train.cols(), std::numeric_limits<double>::infinity());
    norm.max.assign(x_train.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < x_train.rows(); ++i) {
        for (std::size_t j = 0; j < x_train.cols(); ++j) {
            norm.min[j] = std::min(norm.min[j], x_train(i, j));
            norm.max[j] = std::max(norm.max[j], x_train(i, j));
        }
    }
    for (std::size_t j = 0; j < x_train.cols(); ++j) {
        if (!(norm.max[j] > norm.min[j])) {
            raise(ErrorKind::DegenerateFeature,
                  "fit_normalization: feature column " + std::to_string(j) +
                      " is constant on the training split");
        }
    }
    return norm;
}

/// x' = 2 (x - min) / (max - min) - 1. Validation and test rows may land
/// outside [-1, 1]; the map is never refitted on them.
inline Matrix apply_normalization(const Matrix& x, const Normalization& norm) {
    if (x.cols() != norm.min.size()) {
        raise(ErrorKind::Bounds, "apply_normalization: dimension mismatch");
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double span = norm.max[j] - norm.min[j];
        for (std::size_t i = 0; i < x.rows(); ++i) {
            out(i, j) = 2.0 * (x(i, j) - norm.min[j]) / span - 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// 1-NN wrapper fitness
// ---------------------------------------------------------------------------

/// Validation accuracy of a 1-nearest-neighbour classifier restricted to
/// the subset's columns. Distance ties resolve to the lower training-row
/// index. Deterministic, which keeps the genetic search reproducible.
inline double fitness_knn(const Matrix& x_train, const std::vector<int>& y_train,
                          const Matrix& x_val, const std::vector<int>& y_val,
                          const std::vector<std::size_t>& subset) {
    if (subset.empty()) {
        raise(ErrorKind::Precondition, "fitness_knn: empty feature subset");
    }
    std::size_t correct = 0;
    for (std::size_t v = 0; v < x_val.rows(); ++v) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_row = 0;
        for (std::size_t t = 0; t < x_train.rows(); ++t) {
            double dist = 0.0;
            for (std::size_t j : subset) {
                const double d = x_val(v, j) - x_train(t, j);
                dist += d * d;
            }
            if (dist < best) {
                best = dist;
                best_row = t;
            }
        }
        correct += (y_train[best_row] == y_val[v]);
    }
    return static_cast<double>(correct) / static_cast<double>(x_val.rows());
}

// ---------------------------------------------------------------------------
// Genetic subset selection
// ---------------------------------------------------------------------------

struct GAConfig {
    std::size_t population = 40;
    std::size_t generations = 30;
    std::size_t subset_size = 9;
    double mutation_rate = 0.1;
    std::size_t tournament_size = 3;
    std::size_t elitism = 2;
    std::uint64_t seed = 0;
};

struct GAResult {
    std::vector<std::size_t> selected;  // sorted, distinct
    double fitness = 0.0;
    Vector best_per_generation;  // includes the initial population at [0]
};

namespace detail {

inline std::vector<std::size_t> random_subset(std::size_t d, std::size_t size,
                                              Rng& rng) {
    std::set<std::size_t> picked;
    while (picked.size() < size) {
        picked.insert(rng.uniform_below(d));
    }
    return {picked.begin(), picked.end()};
}

/// Uniform mix of two parent index sets: common indices are kept, the
/// remaining slots are filled by sampling the symmetric difference.
inline std::vector<std::size_t> crossover(const std::vector<std::size_t>& a,
                                          const std::vector<std::size_t>& b,
                                          Rng& rng) {
    std::set<std::size_t> sa(a.begin(), a.end());
    std::set<std::size_t> sb(b.begin(), b.end());
    std::set<std::size_t> child;
    std::vector<std::size_t> difference;
    for (std::size_t i : sa) {
        if (sb.count(i)) child.insert(i);
        else difference.push_back(i);
    }
    for (std::size_t i : sb) {
        if (!sa.count(i)) difference.push_back(i);
    }
    std::sort(difference.begin(), difference.end());
    while (child.size() < a.size()) {
        const std::size_t pick = rng.uniform_below(difference.size());
        child.insert(difference[pick]);
        difference.erase(difference.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return {child.begin(), child.end()};
}

inline void mutate(std::vector<std::size_t>& subset, std::size_t d, Rng& rng) {
    std::set<std::size_t> current(subset.begin(), subset.end());
    std::size_t replacement = rng.uniform_below(d);
    while (current.count(replacement)) replacement = rng.uniform_below(d);
    const std::size_t slot = rng.uniform_below(subset.size());
    subset[slot] = replacement;
    std::sort(subset.begin(), subset.end());
}

} // namespace detail

/// Wrapper feature selection: evolves fixed-size index subsets against a
/// 1-NN validation-accuracy fitness. Elitism makes the best fitness
/// non-decreasing across generations; the overall best individual is
/// returned, with exact-fitness ties resolved to the lexicographically
/// smallest subset.
inline GAResult ga_select(const Matrix& x_train, const std::vector<int>& y_train,
                          const Matrix& x_val, const std::vector<int>& y_val,
                          const GAConfig& config) {
    const std::size_t d = x_train.cols();
    if (d < config.subset_size) {
        raise(ErrorKind::Precondition, "ga_select: subset_size " +
                                           std::to_string(config.subset_size) +
                                           " exceeds feature count " +
                                           std::to_string(d));
    }
    if (config.elitism >= config.population) {
        raise(ErrorKind::Precondition, "ga_select: elitism must be < population");
    }
    {
        std::set<int> label_set(y_train.begin(), y_train.end());
        if (label_set.size() < 2) {
            raise(ErrorKind::Precondition, "ga_select: need at least 2 classes");
        }
    }
    GAResult result;
    if (d == config.subset_size) {
        result.selected.resize(d);
        for (std::size_t j = 0; j < d; ++j) result.selected[j] = j;
        result.fitness = fitness_knn(x_train, y_train, x_val, y_val, result.selected);
        result.best_per_generation = {result.fitness};
        return result;
    }

    Rng rng = Rng(config.seed);
    using Individual = std::vector<std::size_t>;
    std::vector<Individual> population(config.population);
    for (auto& ind : population) {
        ind = detail::random_subset(d, config.subset_size, rng);
    }

    Vector scores(config.population);
    const auto evaluate = [&] {
        parallel_for(config.population, [&](std::size_t i) {
            scores[i] = fitness_knn(x_train, y_train, x_val, y_val, population[i]);
        });
    };
    // (fitness desc, subset lex asc): used for elites and the global best.
    const auto better = [&](std::size_t i, std::size_t j) {
        if (scores[i] != scores[j]) return scores[i] > scores[j];
        return population[i] < population[j];
    };

    Individual best_subset;
    double best_fitness = -1.0;
    const auto track_best = [&] {
        for (std::size_t i = 0; i < config.population; ++i) {
            if (scores[i] > best_fitness ||
                (scores[i] == best_fitness && population[i] < best_subset)) {
                best_fitness = scores[i];
                best_subset = population[i];
            }
        }
    };

    evaluate();
    track_best();
    result.best_per_generation.push_back(best_fitness);

    std::vector<std::size_t> order(config.population);
    for (std::size_t gen = 0; gen < config.generations; ++gen) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), better);

        const auto tournament = [&]() -> const Individual& {
            std::size_t winner = rng.uniform_below(config.population);
            for (std::size_t t = 1; t < config.tournament_size; ++t) {
                const std::size_t challenger = rng.uniform_below(config.population);
                if (better(challenger, winner)) winner = challenger;
            }
            return population[winner];
        };

        std::vector<Individual> next;
        next.reserve(config.population);
        for (std::size_t e = 0; e < config.elitism; ++e) {
            next.push_back(population[order[e]]);
        }
        while (next.size() < config.population) {
            Individual child = detail::crossover(tournament(), tournament(), rng);
            if (rng.uniform() < config.mutation_rate) {
                detail::mutate(child, d, rng);
            }
            next.push_back(std::move(child));
        }
        population = std::move(next);
        evaluate();
        track_best();
        result.best_per_generation.push_back(best_fitness);
    }

    result.selected = best_subset;
    result.fitness = best_fitness;
    return result;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PCAModel {
    Vector mean;             // d
    Matrix components;       // k x d, orthonormal rows
    Vector explained_variance;  // k, non-increasing
    double total_variance = 0.0;
};

/// Top-k principal directions of the centered data, from the eigenpairs
/// of the unbiased sample covariance. Sign convention: the
/// largest-magnitude entry of each component is positive.
inline PCAModel pca_fit(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (k < 1 || k > std::min(n - 1, d)) {
        raise(ErrorKind::Bounds, "pca_fit: k must lie in [1, min(n-1, d)]");
    }
    PCAModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += x(i, j);
    }
    for (double& m : model.mean) m /= static_cast<double>(n);

    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = x(i, a) - model.mean[a];
            for (std::size_t b = a; b < d; ++b) {
                cov(a, b) += da * (x(i, b) - model.mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            const double v = cov(a, b) / static_cast<double>(n - 1);
            cov(a, b) = v;
            cov(b, a) = v;
        }
    }
    for (std::size_t a = 0; a < d; ++a) model.total_variance += cov(a, a);

    const EigenDecomposition eig = jacobi_eigen(cov);
    model.components = Matrix(k, d);
    model.explained_variance.resize(k);
    for (std::size_t comp = 0; comp < k; ++comp) {
        model.explained_variance[comp] = std::max(eig.values[comp], 0.0);
        Vector row = eig.vectors.row(comp);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j) {
            if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
        }
        if (row[arg] < 0.0) {
            for (double& v : row) v = -v;
        }
        model.components.set_row(comp, row);
    }
    return model;
}

/// Scores = (X - mean) C^T, one row of k scores per input row.
inline Matrix pca_project(const PCAModel& model, const Matrix& x) {
    if (x.cols() != model.mean.size()) {
        raise(ErrorKind::Bounds, "pca_project: dimension mismatch");
    }
    const std::size_t k = model.components.rows();
    Matrix scores(x.rows(), k);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) {
                acc += (x(i, j) - model.mean[j]) * model.components(c, j);
            }
            scores(i, c) = acc;
        }
    }
    return scores;
}

} // namespace shmloc::features
