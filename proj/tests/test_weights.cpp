#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "wdsub/errors.hpp"
#include "wdsub/weights.hpp"

using namespace wdsub;

namespace {

// Characteristic by direct block sums over every dyadic interval.
double brute_q2(const std::vector<double>& leaves) {
    const std::size_t n = leaves.size();
    double q = 1.0;
    for (std::size_t len = n; len >= 1; len /= 2) {
        for (std::size_t start = 0; start < n; start += len) {
            double sw = 0.0, su = 0.0;
            for (std::size_t k = start; k < start + len; ++k) {
                sw += leaves[k];
                su += 1.0 / leaves[k];
            }
            q = std::max(q, (sw / len) * (su / len));
        }
        if (len == 1) break;
    }
    return q;
}

double integrate_power(double a, double b, double delta) {
    // Substitution t = a + (b − a)x^m smooths the endpoint singularity at t = 0.
    const int m = a == 0.0 ? static_cast<int>(std::ceil(3.0 / (1.0 + delta))) : 1;
    const int steps = 20000;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double x = static_cast<double>(i) / steps;
        const double t = a + (b - a) * std::pow(x, m);
        const double jac = (b - a) * m * std::pow(x, m - 1);
        const double f = (t > 0 ? std::pow(t, delta) : 0.0) * jac;
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f;
    }
    return acc / (3.0 * steps);
}

}  // namespace

TEST(WeightTree, AveragesAndValidation) {
    WeightTree w(1, {2.0, 0.5});
    EXPECT_DOUBLE_EQ(w.avg_w(1), 1.25);
    EXPECT_DOUBLE_EQ(w.avg_u(1), 1.25);
    EXPECT_DOUBLE_EQ(a2_characteristic(w), 25.0 / 16.0);
    EXPECT_DOUBLE_EQ(a2_characteristic(WeightTree(3, std::vector<double>(8, 3.7))), 1.0);
    EXPECT_THROW(WeightTree(1, {1.0, 0.0}), InvalidInput);
    EXPECT_THROW(WeightTree(1, {1.0, -1.0}), InvalidInput);
    EXPECT_THROW(WeightTree(2, {1.0, 1.0}), InvalidInput);
    EXPECT_THROW(WeightTree(1, {1.0, NAN}), InvalidInput);
}

TEST(WeightTree, MatchesBlockEnumerationAndJensen) {
    std::mt19937_64 rng(1);
    for (int depth = 0; depth <= 8; ++depth) {
        for (int i = 0; i < 50; ++i) {
            const WeightTree w = random_weight(depth, 0.7, rng);
            EXPECT_NEAR(a2_characteristic(w), brute_q2(w.leaves()), 1e-12 * brute_q2(w.leaves()));
            for (std::size_t k = 1; k < w.node_avg_w().size(); ++k) {
                ASSERT_GE(w.avg_w(k) * w.avg_u(k), 1.0 - 1e-14);
                if (k < w.leaf_count()) {
                    ASSERT_DOUBLE_EQ(w.avg_w(k), 0.5 * (w.avg_w(2 * k) + w.avg_w(2 * k + 1)));
                }
            }
        }
    }
}

TEST(WeightTree, NodeMaximumEqualsStoppingTimeSupremum) {
    // A stopping time on a depth-n tree is a partition of [0, 1) into dyadic
    // intervals; the characteristic at it is the maximum over its blocks.
    std::mt19937_64 rng(2);
    std::bernoulli_distribution stop(0.4);
    for (int depth = 1; depth <= 4; ++depth) {
        for (int trial = 0; trial < 200; ++trial) {
            const WeightTree w = random_weight(depth, 1.0, rng);
            double best = 1.0;
            for (int draw = 0; draw < 200; ++draw) {
                double q = 1.0;
                std::function<void(std::size_t, int)> walk = [&](std::size_t node, int level) {
                    if (level == depth || stop(rng)) {
                        q = std::max(q, w.avg_w(node) * w.avg_u(node));
                        return;
                    }
                    walk(2 * node, level + 1);
                    walk(2 * node + 1, level + 1);
                };
                walk(1, 0);
                best = std::max(best, q);
            }
            EXPECT_LE(best, a2_characteristic(w) * (1 + 1e-14));
            // Stopping everywhere at the maximising node's level attains it.
            double level_best = 1.0;
            for (int l = 0; l <= depth; ++l) {
                double q = 1.0;
                for (std::size_t k = 0; k < (std::size_t{1} << l); ++k) {
                    const std::size_t i = WeightTree::node_index(l, k);
                    q = std::max(q, w.avg_w(i) * w.avg_u(i));
                }
                level_best = std::max(level_best, q);
            }
            EXPECT_DOUBLE_EQ(level_best, a2_characteristic(w));
        }
    }
}

TEST(Truncation, Examples) {
    WeightTree w(1, {2.0, 0.5});
    const WeightTree t = truncate_above(w, 1.0);
    EXPECT_EQ(t.leaves(), (std::vector<double>{1.0, 0.5}));
    EXPECT_DOUBLE_EQ(a2_characteristic(t), 0.75 * 1.5);
    EXPECT_EQ(truncate_above(w, 3.0).leaves(), w.leaves());
    const WeightTree one = truncate_two_sided(w, 1.0);
    EXPECT_DOUBLE_EQ(a2_characteristic(one), 1.0);
    for (double v : one.leaves()) EXPECT_DOUBLE_EQ(v, 1.0);
    EXPECT_THROW(truncate_two_sided(w, 0.5), DomainError);
    EXPECT_THROW(truncate_above(w, 0.0), DomainError);
}

TEST(Truncation, NeverIncreasesCharacteristic) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int depth = 2; depth <= 8; ++depth) {
        for (int i = 0; i < 200; ++i) {
            const WeightTree w = random_weight(depth, 1.2, rng);
            const double q = brute_q2(w.leaves());
            const auto& L = w.leaves();
            const double lo = *std::min_element(L.begin(), L.end()), hi = *std::max_element(L.begin(), L.end());
            const double a = std::exp(std::log(lo) + U(rng) * (std::log(hi) - std::log(lo)));
            const WeightTree t = truncate_above(w, a);
            ASSERT_LE(brute_q2(t.leaves()), q * (1 + 1e-14));
            const double b = 1.0 + U(rng) * std::max(hi, 1.0 / lo);
            const WeightTree c = truncate_two_sided(w, b);
            ASSERT_LE(brute_q2(c.leaves()), q * (1 + 1e-14));
            for (std::size_t k = 0; k < L.size(); ++k) {
                ASSERT_DOUBLE_EQ(c.leaves()[k], std::clamp(L[k], 1.0 / b, b));
            }
            // Idempotent and monotone in the level.
            EXPECT_EQ(truncate_above(t, a).leaves(), t.leaves());
            const WeightTree t2 = truncate_above(w, 2 * a);
            for (std::size_t k = 0; k < L.size(); ++k) ASSERT_LE(t.leaves()[k], t2.leaves()[k]);
        }
    }
}

TEST(Truncation, TwoSidedAtInverseEpsilonMatchesBox) {
    std::mt19937_64 rng(4);
    const double eps = 0.1;
    for (int i = 0; i < 100; ++i) {
        const WeightTree w = truncate_two_sided(random_weight(6, 2.0, rng), 1.0 / eps);
        for (double v : w.leaves()) {
            ASSERT_GE(v, eps);
            ASSERT_LE(v, 1.0 / eps);
        }
    }
}

TEST(PowerWeight, ClosedFormAgainstQuadrature) {
    const WeightTree one = power_weight_family(1.0, 1);
    EXPECT_NEAR(one.leaves()[0], 0.25, 1e-15);
    EXPECT_NEAR(one.leaves()[1], 0.75, 1e-15);
    EXPECT_DOUBLE_EQ(a2_characteristic(power_weight_family(0.0, 6)), 1.0);
    for (double delta : {-0.95, -0.7, -0.3, 0.5, 1.0, 2.5}) {
        const int depth = 5;
        const WeightTree w = power_weight_family(delta, depth);
        const double n = 32.0;
        for (std::size_t k = 0; k < w.leaf_count(); ++k) {
            const double q = n * integrate_power(k / n, (k + 1) / n, delta);
            ASSERT_NEAR(w.leaves()[k], q, 1e-7 * q) << delta << " " << k;
        }
    }
    EXPECT_THROW(power_weight_family(-1.0, 3), DomainError);
}

TEST(PowerWeight, CharacteristicNondecreasingInDepth) {
    for (double delta : {-0.95, -0.8, -0.5, 0.5, 1.0, 3.0}) {
        double prev = 1.0;
        for (int depth = 0; depth <= 14; ++depth) {
            const double q = a2_characteristic(power_weight_family(delta, depth));
            EXPECT_GE(q, prev * (1 - 1e-12));
            prev = q;
        }
    }
}

TEST(RandomWeights, TruncatedGeneratorRespectsBounds) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const WeightTree w = random_truncated_weight(8, 16.0, 0.1, rng);
        EXPECT_LE(a2_characteristic(w), 16.0);
        for (double v : w.leaves()) {
            ASSERT_GE(v, 0.1);
            ASSERT_LE(v, 10.0);
        }
    }
}

TEST(WeightIO, RoundTripAndMalformed) {
    std::mt19937_64 rng(6);
    const WeightTree w = random_weight(4, 1.0, rng);
    const WeightTree back = parse_weight(to_text(w));
    EXPECT_EQ(back.leaves(), w.leaves());
    EXPECT_EQ(to_text(w).substr(0, 8), "depth 4\n");
    EXPECT_THROW(parse_weight("depth 1\n1.0\n"), InvalidInput);
    EXPECT_THROW(parse_weight("depth 1\n1.0\nabc\n"), InvalidInput);
    EXPECT_THROW(parse_weight("dpth 1\n1.0\n2.0\n"), InvalidInput);
    EXPECT_THROW(parse_weight("depth 1\n1.0\n-2.0\n"), InvalidInput);
}
