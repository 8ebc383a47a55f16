#include <catch2/catch.hpp>

#include <algorithm>

#include "shmloc/novelty.hpp"
#include "shmloc/rng.hpp"
#include "shmloc/synthdata.hpp"

#include "oracles.hpp"

using namespace shmloc;
using namespace shmloc::novelty;

namespace {

Matrix gaussian_samples(Rng& rng, std::size_t n, std::size_t dim,
                        double spread = 1.0) {
    Matrix samples(n, dim);
    for (auto& v : samples.data()) v = spread * rng.normal();
    return samples;
}

const signals::SpectralWindow kWindow{0, 0, 4};

} // namespace

TEST_CASE("fit_baseline on two scalar samples") {
    Matrix samples(2, 1);
    samples(0, 0) = 0.0;
    samples(1, 0) = 2.0;
    const BaselineModel baseline = fit_baseline(samples, {0, 0, 1}, 1e-3);
    REQUIRE(baseline.mean[0] == 1.0);
    REQUIRE(baseline.covariance(0, 0) == Approx(2.0 + 1e-3).epsilon(1e-15));
    REQUIRE(baseline.n_samples == 2);
}

TEST_CASE("identical samples with zero ridge are singular") {
    Matrix samples(5, 2, 3.0);
    try {
        fit_baseline(samples, {0, 0, 2}, 0.0);
        FAIL();
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::SingularBaseline);
    }
}

TEST_CASE("too few samples is a precondition error") {
    Matrix samples(4, 4);
    REQUIRE_THROWS_AS(fit_baseline(samples, {0, 0, 4}, 1e-8), Error);
}

TEST_CASE("stored inverse agrees with the adjugate oracle") {
    Rng rng(21);
    const Matrix samples = gaussian_samples(rng, 50, 4);
    const BaselineModel baseline = fit_baseline(samples, kWindow, 1e-8);
    const Matrix ref = oracles::adjugate_inverse(baseline.covariance);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            REQUIRE(oracles::rel_err(baseline.inv_covariance(i, j), ref(i, j)) < 1e-6);
        }
    }
}

TEST_CASE("msd properties") {
    Rng rng(22);
    const Matrix samples = gaussian_samples(rng, 60, 4);
    const BaselineModel baseline = fit_baseline(samples, kWindow, 1e-10);

    SECTION("distance at the mean is zero") {
        REQUIRE(msd(baseline, baseline.mean) == 0.0);
    }
    SECTION("identity covariance reduces to squared Euclidean distance") {
        BaselineModel unit = baseline;
        unit.covariance = Matrix::identity(4);
        unit.inv_covariance = Matrix::identity(4);
        Vector x = unit.mean;
        x[0] += 1.0;
        REQUIRE(msd(unit, x) == Approx(1.0).epsilon(1e-12));
    }
    SECTION("matches a solve-based oracle that avoids the stored inverse") {
        for (int trial = 0; trial < 20; ++trial) {
            Vector x(4);
            for (double& v : x) v = 3.0 * rng.normal();
            Vector diff(4);
            for (std::size_t j = 0; j < 4; ++j) diff[j] = x[j] - baseline.mean[j];
            const Vector solved = cholesky_solve(cholesky(baseline.covariance), diff);
            double expected = 0.0;
            for (std::size_t j = 0; j < 4; ++j) expected += diff[j] * solved[j];
            REQUIRE(msd(baseline, x) == Approx(expected).epsilon(1e-8));
        }
    }
    SECTION("dimension mismatch is a bounds error") {
        REQUIRE_THROWS_AS(msd(baseline, Vector{1.0, 2.0}), Error);
    }
    SECTION("strictly increasing along any ray from the mean") {
        Vector direction(4);
        for (double& v : direction) v = rng.normal();
        double previous = 0.0;
        for (double t = 0.25; t <= 3.0; t += 0.25) {
            Vector x = baseline.mean;
            for (std::size_t j = 0; j < 4; ++j) x[j] += t * direction[j];
            const double d2 = msd(baseline, x);
            REQUIRE(d2 > previous);
            previous = d2;
        }
    }
}

TEST_CASE("msd is invariant under affine maps of the data") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t dim = 2 + rng.uniform_below(3);
        const Matrix samples = gaussian_samples(rng, 80, dim);

        // Well-conditioned map: identity plus a modest random part.
        Matrix a = Matrix::identity(dim);
        for (auto& v : a.data()) v += 0.3 * rng.normal();
        Vector b(dim);
        for (double& v : b) v = rng.normal();

        Matrix mapped(80, dim);
        for (std::size_t i = 0; i < 80; ++i) {
            const Vector row = mat_vec(a, samples.row(i));
            for (std::size_t j = 0; j < dim; ++j) mapped(i, j) = row[j] + b[j];
        }

        const BaselineModel plain = fit_baseline(samples, kWindow, 0.0);
        const BaselineModel transformed = fit_baseline(mapped, kWindow, 0.0);

        Vector x(dim);
        for (double& v : x) v = 2.0 * rng.normal();
        Vector ax = mat_vec(a, x);
        for (std::size_t j = 0; j < dim; ++j) ax[j] += b[j];

        REQUIRE(msd(transformed, ax) == Approx(msd(plain, x)).epsilon(1e-6));
    }
}

TEST_CASE("mean msd over the fitting sample approximates the dimension") {
    Rng rng(24);
    const std::size_t dim = 6;
    const Matrix samples = gaussian_samples(rng, 250, dim);
    const BaselineModel baseline = fit_baseline(samples, {0, 0, dim}, 0.0);
    double mean_d2 = 0.0;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        mean_d2 += msd(baseline, samples.row(i));
    }
    mean_d2 /= static_cast<double>(samples.rows());
    REQUIRE(mean_d2 > 0.8 * dim);
    REQUIRE(mean_d2 < 1.2 * dim);
}

TEST_CASE("novelty_features") {
    SECTION("empty baseline list gives an empty vector") {
        signals::TransmissibilityRecord record;
        record.pairs = 1;
        record.lines = 8;
        record.magnitudes = Matrix(1, 8, 1.0);
        record.freq_grid.assign(8, 0.0);
        REQUIRE(novelty_features({}, record).empty());
    }
    SECTION("a record at the window mean scores zero") {
        Rng rng(25);
        Matrix samples = gaussian_samples(rng, 30, 4, 0.2);
        for (auto& v : samples.data()) v += 5.0;
        const BaselineModel baseline = fit_baseline(samples, {0, 2, 6}, 1e-9);

        signals::TransmissibilityRecord record;
        record.pairs = 1;
        record.lines = 8;
        record.magnitudes = Matrix(1, 8, 0.0);
        record.freq_grid.assign(8, 0.0);
        for (std::size_t j = 0; j < 4; ++j) {
            record.magnitudes(0, 2 + j) = baseline.mean[j];
        }
        const Vector features = novelty_features({baseline}, record);
        REQUIRE(features.size() == 1);
        REQUIRE(features[0] == 0.0);
    }
}

TEST_CASE("normal-condition records score lower than every damaged class") {
    using namespace shmloc::synth;
    const ChainModel model = build_wing_model(ModelConfig{});
    const SensorLayout layout = default_sensor_layout(12, 64);
    const RawDataset dataset = generate_dataset(model, layout, 12, 0.02, 99);

    const auto grid = signals::default_window_grid(9, 64, 8);
    std::vector<const ClassifiedRecord*> pool;
    for (const auto& rec : dataset.records) {
        if (rec.class_id == kUndamagedClass && rec.rep < 12) pool.push_back(&rec);
    }
    std::vector<BaselineModel> baselines;
    for (const auto& w : grid) {
        Matrix samples(pool.size(), w.length());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            samples.set_row(i, signals::window_slice(pool[i]->record, w));
        }
        baselines.push_back(fit_baseline(samples, w));
    }

    const auto median_score = [&](int class_id, bool normal_eval_half) {
        std::vector<double> scores;
        for (const auto& rec : dataset.records) {
            if (rec.class_id != class_id) continue;
            if (normal_eval_half && rec.rep < 12) continue;
            const Vector f = novelty_features(baselines, rec.record);
            double total = 0.0;
            for (double v : f) total += v;
            scores.push_back(total / static_cast<double>(f.size()));
        }
        std::sort(scores.begin(), scores.end());
        return scores[scores.size() / 2];
    };

    const double normal_median = median_score(kUndamagedClass, true);
    for (int c = 1; c <= 9; ++c) {
        REQUIRE(normal_median < median_score(c, false));
    }
}
