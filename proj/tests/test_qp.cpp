#include <doctest.h>

#include <cmath>
#include <limits>

#include "cbfsim/qp.hpp"

using namespace cbfsim;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Deterministic portable generator for test problems.
struct TestRng {
    std::uint64_t s;
    explicit TestRng(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() {
        s += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (double(next() >> 11) * 0x1.0p-53);
    }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + int(next() % std::uint64_t(hi - lo + 1));
    }
};

qp::QpProblem random_spd_problem(TestRng& rng, int dim, int n_rows, bool allow_soft) {
    qp::QpProblem p;
    p.dim = dim;
    MatrixXd a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    p.hessian = a * a.transpose() + 0.5 * MatrixXd::Identity(dim, dim);
    p.linear = VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return rng.uniform(-2.0, 2.0); });
    for (int k = 0; k < n_rows; ++k) {
        qp::ConstraintRow row;
        row.offset = rng.uniform(-2.0, 2.0);
        row.gradient =
            VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return rng.uniform(-1.0, 1.0); });
        if (allow_soft && rng.uniform(0.0, 1.0) < 0.3) {
            row.kind = qp::RowKind::Soft;
            row.slack_weight = rng.uniform(1.0, 100.0);
        }
        p.rows.push_back(row);
    }
    return p;
}

// Independent expansion of soft rows into explicit slack variables: each soft
// row i gains s_i with cost w_i s_i^2, constraints g.u + s_i >= -offset and
// s_i >= 0, all hard.
qp::QpProblem expand_soft(const qp::QpProblem& p) {
    int n_soft = 0;
    for (const auto& r : p.rows)
        if (r.kind == qp::RowKind::Soft) ++n_soft;
    qp::QpProblem q;
    q.dim = p.dim + n_soft;
    q.hessian = MatrixXd::Zero(q.dim, q.dim);
    q.hessian.topLeftCorner(p.dim, p.dim) = p.hessian;
    q.linear = VectorXd::Zero(q.dim);
    q.linear.head(p.dim) = p.linear;
    int k = p.dim;
    for (const auto& r : p.rows) {
        qp::ConstraintRow row;
        row.offset = r.offset;
        row.gradient = VectorXd::Zero(q.dim);
        row.gradient.head(p.dim) = r.gradient;
        if (r.kind == qp::RowKind::Soft) {
            q.hessian(k, k) = 2.0 * r.slack_weight;
            row.gradient(k) = 1.0;
            q.rows.push_back(row);
            qp::ConstraintRow bound;
            bound.offset = 0.0;
            bound.gradient = VectorXd::Zero(q.dim);
            bound.gradient(k) = 1.0;
            q.rows.push_back(bound);
            ++k;
        } else {
            q.rows.push_back(row);
        }
    }
    return q;
}

// Exhaustive active-set enumeration over hard-only problems: for every subset
// of rows treated as equalities, solve the KKT system and keep the candidate
// that is primal feasible with nonnegative multipliers.
bool oracle_hard(const qp::QpProblem& p, VectorXd& best) {
    const int m = int(p.rows.size());
    bool found = false;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < m; ++i)
            if (mask & (1 << i)) act.push_back(i);
        const int na = int(act.size());
        if (na > p.dim) continue;
        MatrixXd kkt(p.dim + na, p.dim + na);
        kkt.setZero();
        kkt.topLeftCorner(p.dim, p.dim) = p.hessian;
        VectorXd rhs(p.dim + na);
        rhs.head(p.dim) = -p.linear;
        for (int a = 0; a < na; ++a) {
            kkt.block(0, p.dim + a, p.dim, 1) = -p.rows[act[a]].gradient;
            kkt.block(p.dim + a, 0, 1, p.dim) = p.rows[act[a]].gradient.transpose();
            rhs(p.dim + a) = -p.rows[act[a]].offset;
        }
        Eigen::FullPivLU<MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        VectorXd sol = lu.solve(rhs);
        VectorXd u = sol.head(p.dim);
        VectorXd mult = sol.tail(na);
        if ((mult.array() < -1e-9).any()) continue;
        bool primal_ok = true;
        for (int i = 0; i < m; ++i) {
            const double c = p.rows[i].offset + p.rows[i].gradient.dot(u);
            if (c < -1e-8 * (1.0 + std::abs(p.rows[i].offset))) primal_ok = false;
        }
        if (!primal_ok) continue;
        const double obj = 0.5 * u.dot(p.hessian * u) + p.linear.dot(u);
        if (obj < best_obj - 1e-12) {
            best_obj = obj;
            best = u;
            found = true;
        }
    }
    return found;
}

// The penalty objective charges w * slack^2 per row, so the quantity that is
// provably non-increasing in w is the sum of squared slacks, not the plain sum:
// comparing optima at w1 < w2 and adding the two optimality inequalities gives
// (w2 - w1) * (g(u2) - g(u1)) <= 0 for g = sum of squared violations.
double total_sq_slack(const qp::QpProblem& p, const VectorXd& u) {
    double s = 0.0;
    for (const auto& r : p.rows) {
        const double v = std::max(0.0, -(r.offset + r.gradient.dot(u)));
        s += v * v;
    }
    return s;
}

}  // namespace

TEST_CASE("unconstrained minimum") {
    qp::QpProblem p;
    p.dim = 2;
    p.hessian = 2.0 * MatrixXd::Identity(2, 2);
    p.linear = VectorXd::Zero(2);
    p.linear << -2.0, 0.0;
    auto s = qp::solve(p);
    CHECK(s.feasible);
    CHECK(s.u(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.u(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(qp::verify_kkt(p, s) <= 1e-10);
}

TEST_CASE("single active row projection") {
    qp::QpProblem p;
    p.dim = 2;
    p.hessian = 2.0 * MatrixXd::Identity(2, 2);
    p.linear = VectorXd::Zero(2);
    p.linear << -2.0, 0.0;
    qp::ConstraintRow row;
    row.offset = -2.0;
    row.gradient = VectorXd::Zero(2);
    row.gradient << 1.0, 0.0;
    p.rows.push_back(row);
    auto s = qp::solve(p);
    CHECK(s.feasible);
    CHECK(s.u(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(s.u(1) == doctest::Approx(0.0).epsilon(1e-10));
    REQUIRE(s.active_set.size() == 1);
    CHECK(s.active_set[0] == 0);
    CHECK(s.slacks(0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(qp::verify_kkt(p, s) <= 1e-8);

    SUBCASE("perturbed point has large residual") {
        auto bad = s;
        bad.u(0) += 0.1;
        CHECK(qp::verify_kkt(p, bad) >= 0.05);
    }
}

TEST_CASE("symmetric infeasible pair yields the center") {
    qp::QpProblem p;
    p.dim = 1;
    p.hessian = 2.0 * MatrixXd::Identity(1, 1);
    p.linear = VectorXd::Zero(1);
    qp::ConstraintRow r1;  // u >= 1
    r1.offset = -1.0;
    r1.gradient = VectorXd::Constant(1, 1.0);
    qp::ConstraintRow r2;  // u <= -1
    r2.offset = -1.0;
    r2.gradient = VectorXd::Constant(1, -1.0);
    p.rows = {r1, r2};
    auto s = qp::solve(p);
    CHECK(!s.feasible);
    CHECK(s.u(0) == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(s.slacks(0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(s.slacks(1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("error paths") {
    qp::QpProblem p;
    p.dim = 2;
    p.hessian = MatrixXd::Identity(2, 2);
    p.hessian(1, 1) = -1.0;  // indefinite
    p.linear = VectorXd::Zero(2);
    CHECK_THROWS_AS(qp::solve(p), qp::NonConvexError);

    qp::QpProblem q;
    q.dim = 2;
    q.hessian = MatrixXd::Identity(2, 2);
    q.linear = VectorXd::Zero(3);  // wrong size
    CHECK_THROWS_AS(qp::solve(q), qp::DimensionMismatchError);

    qp::QpProblem big;
    big.dim = qp::kDimCap + 1;
    big.hessian = MatrixXd::Identity(big.dim, big.dim);
    big.linear = VectorXd::Zero(big.dim);
    CHECK_THROWS_AS(qp::solve(big), qp::DimensionMismatchError);
}

TEST_CASE("oracle equivalence on random problems") {
    TestRng rng(0xC0FFEE01ULL);
    int n_feasible = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int dim = rng.uniform_int(1, 4);
        const int rows = rng.uniform_int(0, 6);
        auto p = random_spd_problem(rng, dim, rows, /*allow_soft=*/true);
        auto expanded = expand_soft(p);
        VectorXd oracle_u;
        if (!oracle_hard(expanded, oracle_u)) continue;  // hard rows infeasible
        ++n_feasible;
        auto s = qp::solve(p);
        REQUIRE(s.feasible);
        CHECK((s.u - oracle_u.head(dim)).cwiseAbs().maxCoeff() <= 1e-7);
        CHECK(qp::verify_kkt(p, s) <= 1e-7);
    }
    CHECK(n_feasible >= 300);  // the suite must actually exercise the oracle
}

TEST_CASE("least-infeasible fallback matches softened oracle") {
    TestRng rng(0xC0FFEE02ULL);
    int n_infeasible = 0;
    for (int trial = 0; trial < 400 && n_infeasible < 60; ++trial) {
        const int dim = rng.uniform_int(1, 3);
        auto p = random_spd_problem(rng, dim, rng.uniform_int(2, 5), /*allow_soft=*/false);
        auto s = qp::solve(p);
        if (s.feasible) continue;
        ++n_infeasible;
        // Oracle: soften every row at the fallback weight, expand, enumerate.
        qp::QpProblem softened = p;
        for (auto& r : softened.rows) {
            r.kind = qp::RowKind::Soft;
            r.slack_weight = qp::kInfeasibleSlackWeight;
        }
        auto expanded = expand_soft(softened);
        VectorXd oracle_u;
        REQUIRE(oracle_hard(expanded, oracle_u));
        CHECK((s.u - oracle_u.head(dim)).cwiseAbs().maxCoeff() <= 1e-6);
    }
    CHECK(n_infeasible >= 30);
}

TEST_CASE("monotone slack in the penalty weight") {
    TestRng rng(0xC0FFEE03ULL);
    int n_checked = 0;
    for (int trial = 0; trial < 2000 && n_checked < 100; ++trial) {
        const int dim = rng.uniform_int(1, 3);
        auto p = random_spd_problem(rng, dim, rng.uniform_int(2, 5), /*allow_soft=*/false);
        if (qp::solve(p).feasible) continue;
        ++n_checked;
        double prev = std::numeric_limits<double>::infinity();
        for (double w : {1e2, 1e3, 1e4, 1e5, 1e6}) {
            qp::QpProblem soft = p;
            for (auto& r : soft.rows) {
                r.kind = qp::RowKind::Soft;
                r.slack_weight = w;
            }
            auto s = qp::solve(soft);
            const double tot = total_sq_slack(p, s.u);
            CHECK(tot <= prev + 1e-9);
            prev = tot;
        }
    }
    CHECK(n_checked >= 50);
}

TEST_CASE("scale equivariance and determinism") {
    TestRng rng(0xC0FFEE04ULL);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_spd_problem(rng, 3, 4, /*allow_soft=*/false);
        auto s1 = qp::solve(p);
        auto s2 = qp::solve(p);
        // bit-identical repeat
        CHECK(std::memcmp(s1.u.data(), s2.u.data(), sizeof(double) * 3) == 0);

        qp::QpProblem scaled = p;
        const double c = 7.5;
        scaled.hessian *= c;
        scaled.linear *= c;
        auto s3 = qp::solve(scaled);
        CHECK(s3.feasible == s1.feasible);
        if (s1.feasible) CHECK((s1.u - s3.u).cwiseAbs().maxCoeff() <= 1e-9);
    }
}
