#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "wdsub/errors.hpp"
#include "wdsub/martingale.hpp"
#include "wdsub/mollify.hpp"
#include "wdsub/parallel.hpp"

using namespace wdsub;

namespace {

std::vector<double> random_signs(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<double> s(n);
    for (double& v : s) v = coin(rng) ? 1.0 : -1.0;
    return s;
}

// Mean over leaves of the sum along the root-to-leaf path, computed per leaf.
template <class Step>
double path_average(int depth, Step step) {
    const std::size_t n = std::size_t{1} << depth;
    double total = 0.0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        double acc = step(0, 1);
        std::size_t node = 1;
        for (int l = depth - 1; l >= 0; --l) {
            const std::size_t child = 2 * node + ((leaf >> l) & 1);
            acc += step(node, child);
            node = child;
        }
        total += acc;
    }
    return total / n;
}

double vec_norm(const double* v, int d) {
    double a = 0.0;
    for (int j = 0; j < d; ++j) a += v[j] * v[j];
    return std::sqrt(a);
}

// Leaf-space matrix of the scalar transform T_σ through an explicit Haar basis.
Eigen::MatrixXd transform_matrix(int depth, const std::vector<double>& sigma) {
    const int n = 1 << depth;
    Eigen::MatrixXd H(n, n);
    H.col(0).setOnes();
    for (int node = 1; node < n; ++node) {
        const int level = static_cast<int>(std::floor(std::log2(node)));
        const int width = n >> level;
        const int start = (node - (1 << level)) * width;
        H.col(node).setZero();
        for (int k = 0; k < width / 2; ++k) H(start + k, node) = 1.0;
        for (int k = width / 2; k < width; ++k) H(start + k, node) = -1.0;
    }
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s(i) = sigma[i];
    return H * s.asDiagonal() * H.inverse();
}

double exact_transform_sup(const WeightTree& w) {
    const int n = static_cast<int>(w.leaf_count());
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) W(k, k) = w.leaves()[k];
    double best = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<double> sigma(n);
        for (int i = 0; i < n; ++i) sigma[i] = (mask >> i) & 1 ? -1.0 : 1.0;
        const Eigen::MatrixXd T = transform_matrix(w.depth(), sigma);
        const Eigen::MatrixXd A = T.transpose() * W * T;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, W);
        best = std::max(best, es.eigenvalues().maxCoeff());
    }
    return std::sqrt(best);
}

}  // namespace

TEST(Martingale, ConstructionAndMartingaleProperty) {
    const DyadicMartingale c = DyadicMartingale::from_leaves(3, 2, std::vector<double>(16, 1.5));
    for (std::size_t i = 1; i < c.leaf_count(); ++i) {
        EXPECT_EQ(c.increment(i), (std::vector<double>{0.0, 0.0}));
    }
    std::mt19937_64 rng(1);
    const DyadicMartingale x = random_martingale(10, 2, rng);
    EXPECT_EQ(x.martingale_defect(), 0.0);
    // E|X_n|² = d up to four standard errors of the leaf average.
    double second = 0.0, fourth = 0.0;
    for (std::size_t k = 0; k < x.leaf_count(); ++k) {
        const double* v = x.value(x.first_leaf() + k);
        const double q = v[0] * v[0] + v[1] * v[1];
        second += q;
        fourth += q * q;
    }
    const double n = static_cast<double>(x.leaf_count());
    const double mean = second / n;
    const double se = std::sqrt((fourth / n - mean * mean) / n);
    EXPECT_NEAR(mean, 2.0, 4.0 * se);

    SimConfig cfg;
    cfg.seed = 5;
    EXPECT_EQ(random_martingale(cfg).leaves(), random_martingale(cfg).leaves());
    cfg.depth = 21;
    EXPECT_THROW(random_martingale(cfg), ConfigError);
    EXPECT_THROW(DyadicMartingale::from_leaves(2, 1, {1.0, 2.0}), InvalidInput);
}

TEST(Martingale, IncrementsRebuildValues) {
    std::mt19937_64 rng(2);
    const DyadicMartingale x = random_martingale(6, 3, rng);
    const auto inc = x.increments();
    const DyadicMartingale y = DyadicMartingale::from_increments(6, 3, x.value_vector(1), inc);
    for (std::size_t i = 1; i < x.node_count(); ++i) {
        for (int j = 0; j < 3; ++j) ASSERT_NEAR(y.value(i)[j], x.value(i)[j], 1e-12);
    }
    for (std::size_t i = 1; i < x.leaf_count(); ++i) {
        for (int j = 0; j < 3; ++j) {
            ASSERT_NEAR(x.value(2 * i)[j] - x.value(i)[j], inc[i * 3 + j], 1e-14);
            ASSERT_NEAR(x.value(2 * i + 1)[j] - x.value(i)[j], -inc[i * 3 + j], 1e-14);
        }
    }
}

TEST(Martingale, SquareBracketIdentity) {
    std::mt19937_64 rng(3);
    for (int depth : {0, 1, 5, 9}) {
        const DyadicMartingale x = random_martingale(depth, 2, rng);
        const double bracket = path_average(depth, [&](std::size_t p, std::size_t c) {
            if (p == 0) return std::pow(vec_norm(x.value(1), 2), 2);
            double a = 0.0;
            for (int j = 0; j < 2; ++j) a += std::pow(x.value(c)[j] - x.value(p)[j], 2);
            return a;
        });
        EXPECT_NEAR(bilinear_form(x, x), terminal_inner(x, x), 1e-12 * bracket);
        EXPECT_NEAR(bracket, terminal_inner(x, x), 1e-12 * bracket);
    }
}

TEST(Martingale, SampledAgreesWithEnumeration) {
    std::mt19937_64 rng(4);
    for (int depth = 1; depth <= 6; ++depth) {
        const DyadicMartingale x = random_martingale(depth, 2, rng);
        const SampledEstimate est = sampled_square_norm(x, 20000, rng);
        EXPECT_NEAR(est.mean, terminal_inner(x, x), 4.0 * est.std_error);
    }
}

TEST(Transform, MultipliersAndSubordination) {
    std::mt19937_64 rng(5);
    const DyadicMartingale x = random_martingale(5, 2, rng);
    const std::size_t n = x.leaf_count();
    const DyadicMartingale same = transform(x, std::vector<double>(n, 1.0));
    const DyadicMartingale neg = transform(x, std::vector<double>(n, -1.0));
    for (std::size_t i = 1; i < x.node_count(); ++i) {
        for (int j = 0; j < 2; ++j) {
            ASSERT_NEAR(same.value(i)[j], x.value(i)[j], 1e-12);
            ASSERT_NEAR(neg.value(i)[j], -x.value(i)[j], 1e-12);
        }
    }
    const WeightTree one(5, std::vector<double>(n, 1.0));
    EXPECT_NEAR(weighted_norm(neg, one), weighted_norm(x, one), 1e-12);

    std::vector<double> alternating(n);
    for (std::size_t i = 0; i < n; ++i) alternating[i] = i % 2 ? -1.0 : 1.0;
    EXPECT_TRUE(check_subordination(x, transform(x, alternating)).subordinate);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> partial(n);
    for (double& v : partial) v = U(rng);
    EXPECT_TRUE(check_subordination(x, transform(x, partial)).subordinate);

    partial[3] = 1.5;
    EXPECT_THROW(transform(x, partial), InvalidInput);
    EXPECT_THROW(transform(x, std::vector<double>(n - 1, 1.0)), InvalidInput);
}

TEST(Subordination, ViolationsAndRotations) {
    std::mt19937_64 rng(6);
    const DyadicMartingale x = random_martingale(6, 2, rng);
    std::vector<double> doubled = x.leaves();
    for (double& v : doubled) v *= 2.0;
    const SubordinationResult r = check_subordination(x, DyadicMartingale::from_leaves(6, 2, doubled));
    EXPECT_FALSE(r.subordinate);
    EXPECT_EQ(r.first_violation, 0u);

    auto inc = x.increments();
    inc[5 * 2] *= 1.01;
    inc[5 * 2 + 1] *= 1.01;
    const DyadicMartingale bumped = DyadicMartingale::from_increments(6, 2, x.value_vector(1), inc);
    const SubordinationResult b = check_subordination(x, bumped);
    EXPECT_FALSE(b.subordinate);
    EXPECT_EQ(b.first_violation, 5u);

    for (int dim : {2, 3, 5}) {
        const DyadicMartingale xd = random_martingale(7, dim, rng);
        const DyadicMartingale yd = rotate_increments(xd, rng);
        EXPECT_TRUE(check_subordination(xd, yd).subordinate);
        const auto dx = xd.increments(), dy = yd.increments();
        bool differs = false;
        for (std::size_t i = 0; i < xd.leaf_count(); ++i) {
            const double a = vec_norm(dx.data() + i * dim, dim), c = vec_norm(dy.data() + i * dim, dim);
            ASSERT_NEAR(a, c, 1e-12 * (1 + a));
            differs = differs || std::abs(dx[i * dim] - dy[i * dim]) > 1e-6;
        }
        EXPECT_TRUE(differs);
    }
    const std::vector<double> R = random_orthogonal(4, rng);
    Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> M(R.data());
    EXPECT_NEAR((M * M.transpose() - Eigen::Matrix4d::Identity()).norm(), 0.0, 1e-13);

    EXPECT_THROW(check_subordination(x, random_martingale(5, 2, rng)), InvalidInput);
}

TEST(WeightedNorm, Examples) {
    std::mt19937_64 rng(7);
    const DyadicMartingale x = random_martingale(5, 2, rng);
    const WeightTree one(5, std::vector<double>(32, 1.0));
    EXPECT_NEAR(weighted_norm(x, one), std::sqrt(terminal_inner(x, x)), 1e-14);
    const WeightTree w = random_weight(5, 0.8, rng);
    std::vector<double> cst(64);
    for (std::size_t k = 0; k < 32; ++k) {
        cst[2 * k] = 3.0;
        cst[2 * k + 1] = -4.0;
    }
    double mean_w = 0.0;
    for (double v : w.leaves()) mean_w += v / 32;
    EXPECT_NEAR(weighted_norm(DyadicMartingale::from_leaves(5, 2, cst), w), 5.0 * std::sqrt(mean_w), 1e-13);
    std::vector<double> scaled = x.leaves();
    for (double& v : scaled) v *= -2.5;
    EXPECT_NEAR(weighted_norm(DyadicMartingale::from_leaves(5, 2, scaled), w), 2.5 * weighted_norm(x, w), 1e-13);
    EXPECT_THROW(weighted_norm(x, WeightTree(4, std::vector<double>(16, 1.0))), InvalidInput);
}

TEST(BilinearForm, SignsAndTerminalBound) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const int depth = 1 + i % 7;
        const DyadicMartingale y = random_martingale(depth, 2, rng);
        const DyadicMartingale z = random_martingale(depth, 2, rng);
        ASSERT_LE(std::abs(terminal_inner(y, z)), bilinear_form(y, z) * (1 + 1e-12));
    }
    const DyadicMartingale y = random_martingale(6, 2, rng);
    const DyadicMartingale flipped = transform(y, random_signs(y.leaf_count(), rng));
    EXPECT_NEAR(bilinear_form(y, flipped), bilinear_form(y, y), 1e-12 * bilinear_form(y, y));
}

TEST(BilinearEstimate, UnweightedAndZero) {
    std::mt19937_64 rng(9);
    const BellmanConfig cfg;
    for (int depth = 1; depth <= 6; ++depth) {
        const WeightTree one(depth, std::vector<double>(std::size_t{1} << depth, 1.0));
        for (int i = 0; i < 20; ++i) {
            const DyadicMartingale x = random_martingale(depth, 2, rng);
            const DyadicMartingale y = i % 2 ? rotate_increments(x, rng) : transform(x, random_signs(x.leaf_count(), rng));
            const DyadicMartingale z = random_martingale(depth, 2, rng);
            const BilinearResult r = verify_bilinear_estimate(x, y, z, one, 1.0, cfg);
            const double oracle = path_average(depth, [&](std::size_t p, std::size_t c) {
                if (p == 0) {
                    double a = 0.0;
                    for (int j = 0; j < 2; ++j) a += y.value(1)[j] * z.value(1)[j];
                    return std::abs(a);
                }
                double a = 0.0;
                for (int j = 0; j < 2; ++j) a += (y.value(c)[j] - y.value(p)[j]) * (z.value(c)[j] - z.value(p)[j]);
                return std::abs(a);
            });
            EXPECT_NEAR(r.lhs, oracle, 1e-12 * oracle);
            EXPECT_LE(r.ratio, 1.0 + 1e-12);
            EXPECT_TRUE(r.pass);
            EXPECT_TRUE(r.within_bellman_bound);
            EXPECT_NEAR(r.lambda_sq, std::sqrt(r.EG / r.EF), 1e-14 * r.lambda_sq);
            EXPECT_LE(r.bellman_bound_opt, r.bellman_bound_unit * (1 + 1e-14));
        }
    }
    const DyadicMartingale x = random_martingale(4, 2, rng);
    const DyadicMartingale zero = DyadicMartingale::from_leaves(4, 2, std::vector<double>(32, 0.0));
    const WeightTree w = random_weight(4, 0.5, rng);
    const BilinearResult r = verify_bilinear_estimate(x, x, zero, w, 10.0, cfg);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_TRUE(r.pass);
    std::vector<double> big = x.leaves();
    for (double& v : big) v *= 3.0;
    EXPECT_THROW(verify_bilinear_estimate(x, DyadicMartingale::from_leaves(4, 2, big), zero, w, 10.0, cfg),
                 InvalidInput);
}

TEST(Telescope, ConstantsGiveZeroIncrements) {
    BellmanConfig cfg;
    std::vector<double> cst(16 * 2);
    for (std::size_t k = 0; k < 16; ++k) {
        cst[2 * k] = 0.3;
        cst[2 * k + 1] = -0.2;
    }
    const DyadicMartingale x = DyadicMartingale::from_leaves(4, 2, cst);
    std::mt19937_64 rng(10);
    const WeightTree w = random_truncated_weight(4, cfg.Q, cfg.eps, rng);
    const TelescopeResult t = bellman_telescope(x, x, w, cfg);
    EXPECT_TRUE(t.pass);
    // Only the initial jump to X_0 contributes.
    EXPECT_NEAR(t.lhs, 2.0 / cfg.Q * (0.09 + 0.04), 1e-15);
    EXPECT_LE(t.b_end, t.bellman_bound);
}

TEST(Telescope, AggregateMatchesPathEnumeration) {
    BellmanConfig cfg;
    std::mt19937_64 rng(11);
    for (int depth = 1; depth <= 4; ++depth) {
        for (int i = 0; i < 10; ++i) {
            const WeightTree w = random_truncated_weight(depth, cfg.Q, cfg.eps, rng);
            const DyadicMartingale x = random_martingale(depth, 2, rng);
            const DyadicMartingale z = i % 2 ? rotate_increments(x, rng) : random_martingale(depth, 2, rng);
            const TelescopeResult t = bellman_telescope(x, z, w, cfg);
            ASSERT_TRUE(t.pass);
            const double oracle = path_average(depth, [&](std::size_t p, std::size_t c) {
                const double* xp = p ? x.value(p) : nullptr;
                const double* zp = p ? z.value(p) : nullptr;
                double ax = 0.0, az = 0.0;
                for (int j = 0; j < 2; ++j) {
                    ax += std::pow(x.value(c)[j] - (xp ? xp[j] : 0.0), 2);
                    az += std::pow(z.value(c)[j] - (zp ? zp[j] : 0.0), 2);
                }
                return 2.0 / cfg.Q * std::sqrt(ax) * std::sqrt(az);
            });
            EXPECT_NEAR(t.lhs, oracle, 1e-12 * oracle);
            EXPECT_NEAR(t.lhs, 2.0 / cfg.Q * increment_product(x, z), 1e-12 * oracle);
            EXPECT_LE(t.max_linear_residual, 1e-10);
            EXPECT_EQ(t.per_step_margins.size(), static_cast<std::size_t>(depth + 1));
        }
    }
}

TEST(Telescope, RandomInstancesAndAnchors) {
    BellmanConfig cfg;
    cfg.eps = 0.25;
    for (int i = 0; i < 20; ++i) {
        auto rng = substream(3, 0, i);
        const WeightTree w = random_truncated_weight(6, cfg.Q, cfg.eps, rng);
        const DyadicMartingale x = random_martingale(6, 2, rng);
        const DyadicMartingale z = i % 2 ? rotate_increments(x, rng) : random_martingale(6, 2, rng);
        EXPECT_TRUE(bellman_telescope(x, z, w, cfg).pass);
        const auto sens = anchor_sensitivity(x, z, w, cfg);
        ASSERT_EQ(sens.size(), 3u);
        EXPECT_DOUBLE_EQ(sens[2].a, 10 * cfg.ell);
        for (const auto& s : sens) EXPECT_TRUE(s.pass);
        EXPECT_LT(sens[0].bellman_bound, sens[2].bellman_bound);
    }
}

TEST(Telescope, DomainDiagnostics) {
    BellmanConfig cfg;
    std::mt19937_64 rng(12);
    const DyadicMartingale x = random_martingale(4, 2, rng);
    const WeightTree ok = random_truncated_weight(4, cfg.Q, cfg.eps, rng);
    TelescopeOptions small;
    small.a = cfg.ell / 2;
    try {
        bellman_telescope(x, x, ok, cfg, small);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("anchor"), std::string::npos);
    }
    std::vector<double> wide(16, 1.0);
    wide[3] = 50.0;
    try {
        bellman_telescope(x, x, WeightTree(4, wide), cfg);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("truncate"), std::string::npos);
    }
    BellmanConfig tight = cfg;
    tight.Q = 1.0;
    try {
        bellman_telescope(x, x, random_weight(4, 0.3, rng), tight);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("characteristic"), std::string::npos);
    }
}

TEST(Telescope, MollifiedFunctionWithUnitConstant) {
    BellmanConfig cfg;
    const MollifiedBellman mb(cfg);
    std::mt19937_64 rng(13);
    const WeightTree w = random_truncated_weight(3, cfg.Q, cfg.eps, rng);
    const DyadicMartingale x = random_martingale(3, 2, rng);
    const DyadicMartingale z = rotate_increments(x, rng);
    TelescopeOptions opt;
    opt.mollified = &mb;
    const TelescopeResult t = bellman_telescope(x, z, w, cfg, opt);
    EXPECT_TRUE(t.pass);
    EXPECT_NEAR(t.lhs, increment_product(x, z) / cfg.Q, 1e-12);
}

TEST(MainTheorem, DualityAndTrivialCases) {
    std::mt19937_64 rng(14);
    const WeightTree one(6, std::vector<double>(64, 1.0));
    const DyadicMartingale x = random_martingale(6, 2, rng);
    const MainTheoremResult s = verify_main_theorem(x, transform(x, random_signs(64, rng)), one, 1.0, 1);
    EXPECT_LE(s.ratio, 1.0 + 1e-12);
    EXPECT_TRUE(s.pass);

    for (int i = 0; i < 20; ++i) {
        const WeightTree w = random_weight(6, 0.7, rng);
        const MainTheoremResult r = verify_main_theorem(x, x, w, 10.0, i);
        EXPECT_NEAR(r.ratio, 1.0 / r.Q2, 1e-12);
        EXPECT_LE(r.duality_gap, 1e-8);
        EXPECT_LE(r.dual_random, r.dual_extremal * (1 + 1e-12));
        const DyadicMartingale y = rotate_increments(x, rng);
        const MainTheoremResult q = verify_main_theorem(x, y, w, 10.0, i);
        EXPECT_NEAR(q.lhs, weighted_norm(y, w), 1e-10 * q.lhs);
        EXPECT_GT(q.bilinear_ratio, 0.0);
    }
}

TEST(Projection, ConsistencyReport) {
    std::mt19937_64 rng(15);
    const DyadicMartingale x = random_martingale(5, 4, rng);
    const DyadicMartingale y = rotate_increments(x, rng);
    const WeightTree w = random_weight(5, 0.6, rng);
    const ProjectionReport full = projection_consistency(x, y, w, 4);
    ASSERT_EQ(full.rows.size(), 4u);
    EXPECT_TRUE(full.pass);
    EXPECT_EQ(full.rows.back().norm_x, weighted_norm(x, w));
    const ProjectionReport part = projection_consistency(x, y, w, 2);
    ASSERT_EQ(part.rows.size(), 3u);
    EXPECT_TRUE(part.pass);
    EXPECT_EQ(part.rows.back().d_sub, 4);
    for (std::size_t i = 1; i < part.rows.size(); ++i) {
        EXPECT_GE(part.rows[i].norm_x, part.rows[i - 1].norm_x);
        EXPECT_LE(part.rows[i].tail_bound, part.rows[i - 1].tail_bound + 1e-15);
    }
    EXPECT_THROW(projection_consistency(x, y, w, 0), InvalidInput);
    EXPECT_THROW(projection_consistency(x, y, w, 5), InvalidInput);
}

TEST(Sharpness, GreedySearchAgainstExhaustiveSigns) {
    SharpnessOptions opt;
    opt.jobs = 1;
    for (double delta : {-0.9, -0.5, 0.8}) {
        const WeightTree w = power_weight_family(delta, 3);
        const double exact = exact_transform_sup(w);
        const double found = sharpness_ratio(w, opt);
        EXPECT_LE(found, exact * (1 + 1e-9)) << delta;
        EXPECT_GE(found, 0.95 * exact) << delta;
    }
    EXPECT_NEAR(sharpness_ratio(power_weight_family(0.0, 8), opt), 1.0, 1e-9);
}

TEST(Sharpness, ExperimentTableAndDeterminism) {
    const std::vector<double> deltas = deltas_for_characteristic(2.0, 20.0, 3, 8);
    ASSERT_EQ(deltas.size(), 3u);
    EXPECT_NEAR(a2_characteristic(power_weight_family(deltas[0], 8)), 2.0, 1e-9);
    EXPECT_NEAR(a2_characteristic(power_weight_family(deltas[2], 8)), 20.0, 1e-8);
    SharpnessOptions one;
    one.jobs = 1;
    one.restarts = 8;
    SharpnessOptions four = one;
    four.jobs = 4;
    const SharpnessResult a = sharpness_experiment(deltas, 8, one);
    const SharpnessResult b = sharpness_experiment(deltas, 8, four);
    EXPECT_EQ(sharpness_csv(a), sharpness_csv(b));
    EXPECT_EQ(a.slope, b.slope);
    EXPECT_EQ(sharpness_csv(a).substr(0, 27), "delta,depth,Q2,worst_ratio\n");
    for (const auto& r : a.rows) {
        EXPECT_GE(r.worst_ratio, 1.0 - 1e-12);
        EXPECT_LE(r.worst_ratio, 10.0 * r.Q2);
    }
    EXPECT_GT(a.slope, 0.0);
    EXPECT_THROW(sharpness_experiment(deltas, 15), ConfigError);
}

TEST(MartingaleIO, RoundTripAndMalformed) {
    std::mt19937_64 rng(16);
    const DyadicMartingale x = random_martingale(3, 2, rng);
    const std::string text = to_text(x);
    EXPECT_EQ(text.substr(0, 14), "depth 3 dim 2\n");
    EXPECT_EQ(parse_martingale(text).leaves(), x.leaves());
    EXPECT_THROW(parse_martingale("depth 1 dim 1\n1\n2\n"), InvalidInput);
    EXPECT_THROW(parse_martingale("depth 1 dim 1\n1\n2\n3\n"), InvalidInput);
    EXPECT_THROW(parse_martingale("depth 1 dim 1\n5\n1\n3\n"), InvalidInput);
    EXPECT_EQ(parse_martingale("depth 1 dim 1\n2\n1\n3\n").leaves(), (std::vector<double>{1.0, 3.0}));
    EXPECT_THROW(parse_martingale("depth 1 dim 1\n2\nx\n3\n"), InvalidInput);
    EXPECT_THROW(parse_martingale("depth 1\n2\n1\n3\n"), InvalidInput);
}
