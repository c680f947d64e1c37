#include <doctest.h>

#include <cmath>

#include "dflsim/analysis.hpp"
#include "dflsim/error.hpp"
#include "dflsim/rng.hpp"
#include "oracles.hpp"

using namespace dflsim;
using namespace dflsim::analysis;

namespace {

NodeValues values(std::vector<double> v) {
    NodeValues out;
    for (std::size_t i = 0; i < v.size(); ++i) out.ids.push_back(static_cast<NodeId>(i));
    out.values = std::move(v);
    return out;
}

}  // namespace

TEST_SUITE("analysis") {
    TEST_CASE("accuracy statistics") {
        const std::vector<double> constant(5, 0.8);
        const auto c = accuracy_stats(constant);
        CHECK(c.average == doctest::Approx(0.8));
        CHECK(c.minimum == 0.8);
        CHECK(c.maximum == 0.8);
        CHECK(c.std_dev == doctest::Approx(0.0));
        CHECK_FALSE(c.improvement);

        const std::vector<double> two{0.4, 0.8};
        const auto t = accuracy_stats(two);
        CHECK(t.average == doctest::Approx(0.6));
        CHECK(t.std_dev == doctest::Approx(0.2));  // population, not sample
        CHECK_THROWS_AS(accuracy_stats(std::vector<double>{}), PreconditionError);
    }

    TEST_CASE("improvement percentages") {
        AccuracyStats base;
        base.average = 0.7791;
        base.minimum = 0.4;
        base.maximum = 1.0;
        base.std_dev = 0.2;
        AccuracyStats now;
        now.average = 0.9156;
        now.minimum = 0.5;
        now.maximum = 1.0;
        now.std_dev = 0.1;
        const auto imp = improvement_over(now, base);
        CHECK(imp.average == doctest::Approx(17.52).epsilon(1e-3));
        CHECK(imp.minimum == doctest::Approx(25.0));
        CHECK(imp.maximum == doctest::Approx(0.0));
        CHECK(imp.std_dev == doctest::Approx(50.0));  // a smaller spread is an improvement

        const std::vector<double> acc{0.9156};
        const auto with = accuracy_stats(acc, &base);
        REQUIRE(with.improvement);
        CHECK(with.improvement->average == doctest::Approx(imp.average));
    }

    TEST_CASE("pearson on worked examples") {
        const std::vector<double> x{1, 2, 3}, y{2, 4, 7};
        CHECK(pearson(x, y) == doctest::Approx(0.993399).epsilon(1e-6));
        CHECK(pearson(x, x) == doctest::Approx(1.0));
        const std::vector<double> neg{-1, -2, -3};
        CHECK(pearson(x, neg) == doctest::Approx(-1.0));
        const std::vector<double> flat{2, 2, 2};
        CHECK_THROWS_AS(pearson(x, flat), UndefinedCorrelationError);
        CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), PreconditionError);
    }

    TEST_CASE("average ranks share ties") {
        const std::vector<double> v{10, 20, 20, 5};
        CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
    }

    TEST_CASE("spearman on worked examples") {
        const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 3, 2, 5, 4};
        CHECK(spearman(x, y) == doctest::Approx(0.8));
        const std::vector<double> tx{1, 2, 2, 3}, ty{1, 2, 3, 4};
        CHECK(spearman(tx, ty) == doctest::Approx(0.9486832980505139).epsilon(1e-12));
        const std::vector<double> cubes{1, 8, 27, 64, 125};
        CHECK(spearman(x, cubes) == doctest::Approx(1.0));
        CHECK_THROWS_AS(spearman(x, std::vector<double>(5, 3.0)), UndefinedCorrelationError);
    }

    TEST_CASE("correlations agree with the high-precision oracle") {
        Rng rng(17);
        std::uniform_int_distribution<std::size_t> len(2, 100);
        std::uniform_int_distribution<int> coarse(0, 6);
        std::normal_distribution<double> normal;
        std::size_t compared = 0;
        for (int trial = 0; trial < 300; ++trial) {
            const auto n = len(rng);
            std::vector<double> x(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = trial % 2 ? coarse(rng) : normal(rng);
                y[i] = 0.3 * x[i] + normal(rng);
            }
            if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
            CHECK(std::abs(pearson(x, y) - oracle::pearson(x, y)) <= 1e-12);
            CHECK(std::abs(spearman(x, y) - oracle::spearman(x, y)) <= 1e-12);
            ++compared;
        }
        CHECK(compared > 250);
    }

    TEST_CASE("invariances") {
        Rng rng(23);
        std::normal_distribution<double> normal;
        std::vector<double> x(50), y(50);
        for (std::size_t i = 0; i < 50; ++i) {
            x[i] = normal(rng);
            y[i] = x[i] + normal(rng);
        }
        std::vector<double> affine(50), monotone(50);
        for (std::size_t i = 0; i < 50; ++i) {
            affine[i] = 3.5 * x[i] - 2.0;
            monotone[i] = std::exp(x[i]);
        }
        CHECK(pearson(affine, y) == doctest::Approx(pearson(x, y)).epsilon(1e-12));
        CHECK(spearman(monotone, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
        CHECK(pearson(x, y) == doctest::Approx(pearson(y, x)).epsilon(1e-15));
    }

    TEST_CASE("histogram bins") {
        const std::vector<double> v{0.05, 0.15, 0.95};
        const auto h = histogram(v, 0.1);
        REQUIRE(h.size() == 10);
        CHECK(h[0].count == 1);
        CHECK(h[1].count == 1);
        CHECK(h[9].count == 1);
        CHECK(h[9].left == doctest::Approx(0.9));

        const std::vector<double> edges{0.0, 1.0, 1.0, -0.2, 1.3};
        const auto e = histogram(edges, 0.25);
        REQUIRE(e.size() == 4);
        CHECK(e[0].count == 2);
        CHECK(e[3].count == 3);
        CHECK_THROWS(histogram(v, 0.0));
    }

    TEST_CASE("correlation report") {
        const auto a = values({0.9, 0.7, 0.8, 0.6});
        const auto b = values({0.8, 0.5, 0.9, 0.4});
        const auto m = values({100, 20, 300, 10});
        const auto table = correlation_report(a, b, m, values({1, 2, 3, 1}), values({4, 2, 3, 1}), values({1, 0.5, 0.2, 0.1}));
        REQUIRE(table.rows.size() == 6);
        CHECK(table.rows[0].pearson == doctest::Approx(pearson(a.values, b.values)));
        CHECK(table.rows[2].spearman == doctest::Approx(spearman(b.values, m.values)));

        auto shifted = b;
        shifted.ids[0] = 9;
        CHECK_THROWS_AS(correlation_report(a, shifted, m, m, m, m), PreconditionError);
    }
}
