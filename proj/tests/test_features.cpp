#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "shmloc/features.hpp"
#include "shmloc/rng.hpp"

#include "oracles.hpp"

using namespace shmloc;
using namespace shmloc::features;

namespace {

/// Balanced dataset where the planted columns carry a per-class signature
/// and every other column is pure noise.
struct PlantedDataset {
    Matrix x_train, x_val;
    std::vector<int> y_train, y_val;
    std::vector<std::size_t> planted;
};

PlantedDataset make_planted(std::size_t d, std::size_t informative,
                            std::size_t per_class, std::uint64_t seed) {
    PlantedDataset ds;
    Rng rng(seed);
    std::set<std::size_t> cols;
    while (cols.size() < informative) cols.insert(rng.uniform_below(d));
    ds.planted.assign(cols.begin(), cols.end());

    // Staircase signatures: column k is the sole separator of classes
    // k+1 and k+2, so dropping any planted column costs accuracy and the
    // selection pressure covers the whole set.
    Matrix signature(9, informative);
    for (std::size_t c = 0; c < 9; ++c) {
        for (std::size_t k = 0; k < informative; ++k) {
            signature(c, k) = (c == 8 || k < c) ? 2.0 : -2.0;
        }
    }

    const auto fill = [&](Matrix& x, std::vector<int>& y) {
        const std::size_t n = 9 * per_class;
        x = Matrix(n, d);
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int cls = static_cast<int>(i / per_class) + 1;
            y[i] = cls;
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
            for (std::size_t k = 0; k < informative; ++k) {
                x(i, ds.planted[k]) =
                    signature(cls - 1, k % 9) + 0.5 * rng.normal();
            }
        }
    };
    fill(ds.x_train, ds.y_train);
    fill(ds.x_val, ds.y_val);
    return ds;
}

} // namespace

TEST_CASE("fitness_knn") {
    SECTION("validation identical to training scores 1.0") {
        Matrix x(6, 2);
        std::vector<int> y = {1, 1, 2, 2, 3, 3};
        Rng rng(1);
        for (auto& v : x.data()) v = rng.normal();
        REQUIRE(fitness_knn(x, y, x, y, {0, 1}) == 1.0);
    }
    SECTION("a single perfectly separating column scores 1.0") {
        Matrix x_train(4, 3), x_val(4, 3);
        std::vector<int> y = {1, 1, 2, 2};
        for (std::size_t i = 0; i < 4; ++i) {
            x_train(i, 1) = (i < 2) ? -5.0 : 5.0;
            x_val(i, 1) = (i < 2) ? -4.0 : 4.0;
        }
        REQUIRE(fitness_knn(x_train, y, x_val, y, {1}) == 1.0);
    }
    SECTION("shuffled labels give chance-level accuracy on 9 classes") {
        Rng rng(2);
        const std::size_t n = 1800;
        Matrix x_train(n, 4), x_val(n, 4);
        std::vector<int> y_train(n), y_val(n);
        for (auto& v : x_train.data()) v = rng.normal();
        for (auto& v : x_val.data()) v = rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
            y_train[i] = 1 + static_cast<int>(rng.uniform_below(9));
            y_val[i] = 1 + static_cast<int>(rng.uniform_below(9));
        }
        const double acc = fitness_knn(x_train, y_train, x_val, y_val, {0, 1, 2, 3});
        REQUIRE(acc == Approx(1.0 / 9.0).margin(0.06));
    }
}

TEST_CASE("ga_select") {
    SECTION("subset_size equal to d returns the identity subset") {
        const PlantedDataset ds = make_planted(9, 4, 8, 3);
        GAConfig config;
        config.subset_size = 9;
        const GAResult result =
            ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);
        REQUIRE(result.selected == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
    }
    SECTION("recovers planted informative columns") {
        const PlantedDataset ds = make_planted(60, 9, 12, 5);
        GAConfig config;
        config.seed = 11;
        const GAResult result =
            ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);
        std::size_t hits = 0;
        for (std::size_t j : result.selected) {
            hits += std::count(ds.planted.begin(), ds.planted.end(), j);
        }
        REQUIRE(hits >= 8);
    }
    SECTION("deterministic for a fixed seed") {
        const PlantedDataset ds = make_planted(30, 5, 6, 7);
        GAConfig config;
        config.subset_size = 5;
        config.generations = 8;
        config.seed = 19;
        const GAResult a = ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);
        const GAResult b = ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);
        REQUIRE(a.selected == b.selected);
        REQUIRE(a.fitness == b.fitness);
        REQUIRE(a.best_per_generation == b.best_per_generation);
    }
    SECTION("best fitness never decreases across generations") {
        const PlantedDataset ds = make_planted(40, 6, 8, 13);
        GAConfig config;
        config.subset_size = 6;
        config.generations = 15;
        config.seed = 23;
        const GAResult result =
            ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);
        for (std::size_t g = 1; g < result.best_per_generation.size(); ++g) {
            REQUIRE(result.best_per_generation[g] >= result.best_per_generation[g - 1]);
        }
    }
    SECTION("beats the median random subset on validation fitness") {
        const PlantedDataset ds = make_planted(40, 9, 10, 29);
        GAConfig config;
        config.seed = 31;
        const GAResult result =
            ga_select(ds.x_train, ds.y_train, ds.x_val, ds.y_val, config);

        Rng rng(37);
        std::vector<double> random_scores;
        for (int trial = 0; trial < 20; ++trial) {
            std::set<std::size_t> cols;
            while (cols.size() < 9) cols.insert(rng.uniform_below(40));
            random_scores.push_back(fitness_knn(
                ds.x_train, ds.y_train, ds.x_val, ds.y_val,
                std::vector<std::size_t>(cols.begin(), cols.end())));
        }
        std::sort(random_scores.begin(), random_scores.end());
        REQUIRE(result.fitness >= random_scores[random_scores.size() / 2]);
    }
}

TEST_CASE("normalization") {
    Matrix train(2, 1);
    train(0, 0) = 0.0;
    train(1, 0) = 10.0;
    const Normalization norm = fit_normalization(train);

    const auto apply_one = [&](double v) {
        Matrix x(1, 1);
        x(0, 0) = v;
        return apply_normalization(x, norm)(0, 0);
    };

    SECTION("midpoint maps to zero") { REQUIRE(apply_one(5.0) == 0.0); }
    SECTION("endpoints map to -1 and 1 exactly") {
        REQUIRE(apply_one(0.0) == -1.0);
        REQUIRE(apply_one(10.0) == 1.0);
    }
    SECTION("out-of-range test values extrapolate linearly") {
        REQUIRE(apply_one(12.0) == Approx(1.4).epsilon(1e-15));
    }
    SECTION("constant training feature is a degenerate-feature error") {
        Matrix bad(3, 2);
        for (std::size_t i = 0; i < 3; ++i) {
            bad(i, 0) = static_cast<double>(i);
            bad(i, 1) = 7.0;
        }
        try {
            fit_normalization(bad);
            FAIL();
        } catch (const Error& e) {
            REQUIRE(e.kind() == ErrorKind::DegenerateFeature);
            REQUIRE(std::string(e.what()).find("1") != std::string::npos);
        }
    }
    SECTION("invertible on the training split") {
        Rng rng(41);
        Matrix x(50, 3);
        for (auto& v : x.data()) v = 10.0 * rng.normal();
        const Normalization n3 = fit_normalization(x);
        const Matrix mapped = apply_normalization(x, n3);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double back =
                    0.5 * (mapped(i, j) + 1.0) * (n3.max[j] - n3.min[j]) + n3.min[j];
                REQUIRE(back == Approx(x(i, j)).margin(1e-12 * std::abs(x(i, j)) + 1e-12));
            }
        }
    }
}

TEST_CASE("pca") {
    SECTION("collinear 2-D data is fully explained by one component") {
        Matrix x(20, 2);
        for (std::size_t i = 0; i < 20; ++i) {
            const double t = static_cast<double>(i) - 10.0;
            x(i, 0) = 3.0 * t;
            x(i, 1) = -4.0 * t;
        }
        const PCAModel model = pca_fit(x, 1);
        REQUIRE(model.explained_variance[0] ==
                Approx(model.total_variance).epsilon(1e-10));
    }
    SECTION("full-rank projection reconstructs the data") {
        Rng rng(43);
        Matrix x(30, 5);
        for (auto& v : x.data()) v = rng.normal();
        const PCAModel model = pca_fit(x, 5);
        const Matrix scores = pca_project(model, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                double rebuilt = model.mean[j];
                for (std::size_t k = 0; k < 5; ++k) {
                    rebuilt += scores(i, k) * model.components(k, j);
                }
                REQUIRE(rebuilt == Approx(x(i, j)).margin(1e-8));
            }
        }
    }
    SECTION("explained variances match an independent eigensolver") {
        Rng rng(47);
        Matrix x(100, 6);
        for (auto& v : x.data()) v = rng.normal() * (1.0 + 0.5 * rng.uniform());
        const PCAModel model = pca_fit(x, 6);

        Vector mean(6, 0.0);
        for (std::size_t i = 0; i < 100; ++i) {
            for (std::size_t j = 0; j < 6; ++j) mean[j] += x(i, j);
        }
        for (double& m : mean) m /= 100.0;
        Matrix cov(6, 6);
        for (std::size_t i = 0; i < 100; ++i) {
            for (std::size_t a = 0; a < 6; ++a) {
                for (std::size_t b = 0; b < 6; ++b) {
                    cov(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]) / 99.0;
                }
            }
        }
        const Vector ref = oracles::symmetric_eigenvalues(cov);
        for (std::size_t k = 0; k < 6; ++k) {
            REQUIRE(oracles::rel_err(model.explained_variance[k], ref[k]) < 1e-8);
        }
    }
    SECTION("components are orthonormal and the mean projects to zero") {
        Rng rng(53);
        Matrix x(40, 4);
        for (auto& v : x.data()) v = rng.normal() + 3.0;
        const PCAModel model = pca_fit(x, 3);
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
                double dot = 0.0;
                for (std::size_t j = 0; j < 4; ++j) {
                    dot += model.components(a, j) * model.components(b, j);
                }
                REQUIRE(dot == Approx(a == b ? 1.0 : 0.0).margin(1e-10));
            }
        }
        Matrix mean_row(1, 4);
        mean_row.set_row(0, model.mean);
        const Matrix scores = pca_project(model, mean_row);
        for (std::size_t k = 0; k < 3; ++k) {
            REQUIRE(std::abs(scores(0, k)) < 1e-12);
        }
    }
    SECTION("k out of range is a bounds error") {
        Matrix x(5, 3);
        REQUIRE_THROWS_AS(pca_fit(x, 5), Error);
    }
}
