#include "cbfsim/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbfsim::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct GiResult {
    bool feasible = false;
    Eigen::VectorXd x;
    std::vector<int> active;
    Eigen::VectorXd lam;
};

// Dual active-set method (Goldfarb-Idnani): start at the unconstrained
// minimum and add violated constraints one at a time. Constraints are
// C.row(k).x + b(k) >= 0. Infeasibility shows up as a blocked dual step.
// Ties are broken by smallest constraint index so the path is deterministic.
GiResult gi_solve(const Eigen::MatrixXd& G, const Eigen::VectorXd& f,
                  const Eigen::MatrixXd& C, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(G.rows());
    const int m = static_cast<int>(C.rows());

    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw NonConvexError("qp: hessian is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();

    GiResult res;
    res.x = -llt.solve(f);
    std::vector<int>& A = res.active;
    Eigen::VectorXd lam(0);

    std::vector<char> in_active(m, 0);
    const int max_iter = 100 + 20 * m;
    int iter = 0;

    while (true) {
        if (++iter > max_iter) throw IterationLimitError("qp: active-set iteration limit");

        int p = -1;
        double worst = 0.0;
        for (int k = 0; k < m; ++k) {
            if (in_active[k]) continue;
            const double c = C.row(k).dot(res.x) + b(k);
            const double tol = 1e-11 * (1.0 + std::abs(b(k)));
            if (c < -tol && c < worst) {
                worst = c;
                p = k;
            }
        }
        if (p < 0) {
            res.feasible = true;
            res.lam = lam;
            return res;
        }

        const Eigen::VectorXd np = C.row(p).transpose();
        double lam_p = 0.0;

        while (true) {
            if (++iter > max_iter) throw IterationLimitError("qp: active-set iteration limit");
            const int q = static_cast<int>(A.size());

            Eigen::VectorXd z, r(q);
            if (q == 0) {
                z = llt.solve(np);
            } else {
                Eigen::MatrixXd N(n, q);
                for (int j = 0; j < q; ++j) N.col(j) = C.row(A[j]).transpose();
                const Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(N);
                const Eigen::VectorXd d = L.triangularView<Eigen::Lower>().solve(np);
                r = B.colPivHouseholderQr().solve(d);
                z = L.transpose().triangularView<Eigen::Upper>().solve(d - B * r);
            }

            double t1 = kInf;
            int l = -1;
            for (int j = 0; j < q; ++j) {
                if (r(j) > 1e-12) {
                    const double tj = lam(j) / r(j);
                    if (tj < t1) {
                        t1 = tj;
                        l = j;
                    }
                }
            }

            const bool z_zero = z.norm() <= 1e-10 * (1.0 + np.norm());
            if (z_zero) {
                if (l < 0) {
                    res.feasible = false;  // constraint p cannot be satisfied
                    res.lam = lam;
                    return res;
                }
                lam -= t1 * r;
                lam_p += t1;
                in_active[A[l]] = 0;
                A.erase(A.begin() + l);
                Eigen::VectorXd lam2(q - 1);
                for (int j = 0, jj = 0; j < q; ++j)
                    if (j != l) lam2(jj++) = lam(j);
                lam = lam2;
                continue;
            }

            const double znp = z.dot(np);
            const double cp = C.row(p).dot(res.x) + b(p);
            const double t2 = std::max(0.0, -cp / znp);

            if (t1 < t2) {
                res.x += t1 * z;
                lam -= t1 * r;
                lam_p += t1;
                in_active[A[l]] = 0;
                A.erase(A.begin() + l);
                Eigen::VectorXd lam2(q - 1);
                for (int j = 0, jj = 0; j < q; ++j)
                    if (j != l) lam2(jj++) = lam(j);
                lam = lam2;
                continue;
            }

            res.x += t2 * z;
            lam -= t2 * r;
            lam_p += t2;
            A.push_back(p);
            in_active[p] = 1;
            lam.conservativeResize(q + 1);
            lam(q) = lam_p;
            break;
        }
    }
}

void validate(const QpProblem& p) {
    if (p.dim < 1 || p.dim > kDimCap)
        throw DimensionMismatchError("qp: dim out of range");
    if (p.hessian.rows() != p.dim || p.hessian.cols() != p.dim || p.linear.size() != p.dim)
        throw DimensionMismatchError("qp: hessian/linear size mismatch");
    for (const auto& row : p.rows)
        if (row.gradient.size() != p.dim)
            throw DimensionMismatchError("qp: row gradient size mismatch");
    const double hscale = 1.0 + p.hessian.cwiseAbs().maxCoeff();
    if ((p.hessian - p.hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * hscale)
        throw NonConvexError("qp: hessian not symmetric");
    for (const auto& row : p.rows)
        if (row.kind == RowKind::Soft && !(row.slack_weight > 0.0))
            throw std::invalid_argument("qp: soft row requires slack_weight > 0");
}

// Expand soft rows into explicit slack variables:
//   min 1/2 u'Hu + f'u + sum_k w_k s_k^2
//   s.t. a_k + g_k.u (+ s_k) >= 0,  s_k >= 0.
// When soften_hard is set, hard rows get a slack at kInfeasibleSlackWeight.
struct Expanded {
    Eigen::MatrixXd G;
    Eigen::VectorXd f;
    Eigen::MatrixXd C;
    Eigen::VectorXd b;
};

Expanded expand(const QpProblem& p, bool soften_hard) {
    const int n = p.dim;
    const int m = static_cast<int>(p.rows.size());
    int ns = 0;
    std::vector<int> slack_of(m, -1);
    for (int k = 0; k < m; ++k) {
        const bool soft = p.rows[k].kind == RowKind::Soft || soften_hard;
        if (soft) slack_of[k] = ns++;
    }

    Expanded e;
    e.G = Eigen::MatrixXd::Zero(n + ns, n + ns);
    e.G.topLeftCorner(n, n) = p.hessian;
    e.f = Eigen::VectorXd::Zero(n + ns);
    e.f.head(n) = p.linear;
    e.C = Eigen::MatrixXd::Zero(m + ns, n + ns);
    e.b = Eigen::VectorXd::Zero(m + ns);

    for (int k = 0; k < m; ++k) {
        const auto& row = p.rows[k];
        e.C.row(k).head(n) = row.gradient.transpose();
        e.b(k) = row.offset;
        if (slack_of[k] >= 0) {
            const double w = row.kind == RowKind::Soft ? row.slack_weight : kInfeasibleSlackWeight;
            const int si = n + slack_of[k];
            e.G(si, si) = 2.0 * w;
            e.C(k, si) = 1.0;
            e.C(m + slack_of[k], si) = 1.0;  // s_k >= 0
        }
    }
    return e;
}

QpSolution finish(const QpProblem& p, const GiResult& g, bool feasible) {
    const int m = static_cast<int>(p.rows.size());
    QpSolution s;
    s.u = g.x.head(p.dim);
    s.feasible = feasible;
    s.slacks.resize(m);
    for (int k = 0; k < m; ++k) {
        const double c = p.rows[k].offset + p.rows[k].gradient.dot(s.u);
        s.slacks(k) = std::max(0.0, -c);
    }
    for (int idx : g.active)
        if (idx < m) s.active_set.push_back(idx);
    std::sort(s.active_set.begin(), s.active_set.end());
    return s;
}

}  // namespace

QpSolution solve(const QpProblem& p) {
    validate(p);

    const Expanded e = expand(p, false);
    GiResult g = gi_solve(e.G, e.f, e.C, e.b);
    if (g.feasible) {
        QpSolution s = finish(p, g, true);
        s.kkt_residual = verify_kkt(p, s);
        return s;
    }

    // Least-infeasible fallback: every hard row softened at weight M.
    const Expanded e2 = expand(p, true);
    GiResult g2 = gi_solve(e2.G, e2.f, e2.C, e2.b);
    QpSolution s = finish(p, g2, false);

    QpProblem softened = p;
    for (auto& row : softened.rows) {
        if (row.kind == RowKind::Hard) {
            row.kind = RowKind::Soft;
            row.slack_weight = kInfeasibleSlackWeight;
        }
    }
    s.kkt_residual = verify_kkt(softened, s);
    return s;
}

double verify_kkt(const QpProblem& p, const QpSolution& s) {
    if (s.u.size() != p.dim)
        throw DimensionMismatchError("qp: solution dimension mismatch");
    const int m = static_cast<int>(p.rows.size());

    // Gradient of the reduced objective (soft rows folded into a piecewise
    // quadratic penalty): H u + f - sum_soft 2 w_k s_k g_k.
    Eigen::VectorXd grad = p.hessian * s.u + p.linear;
    Eigen::VectorXd c(m);
    std::vector<int> active_hard;
    for (int k = 0; k < m; ++k) {
        const auto& row = p.rows[k];
        c(k) = row.offset + row.gradient.dot(s.u);
        if (row.kind == RowKind::Soft) {
            const double sk = std::max(0.0, -c(k));
            grad -= 2.0 * row.slack_weight * sk * row.gradient;
        } else if (c(k) <= 1e-6 * (1.0 + std::abs(row.offset))) {
            active_hard.push_back(k);
        }
    }

    double residual = 0.0;
    const int q = static_cast<int>(active_hard.size());
    Eigen::VectorXd lam(q);
    if (q > 0) {
        Eigen::MatrixXd N(p.dim, q);
        for (int j = 0; j < q; ++j) N.col(j) = p.rows[active_hard[j]].gradient;
        lam = N.colPivHouseholderQr().solve(grad);
        residual = std::max(residual, (grad - N * lam).cwiseAbs().maxCoeff());
        for (int j = 0; j < q; ++j) {
            residual = std::max(residual, -lam(j));                        // dual feasibility
            residual = std::max(residual, std::abs(lam(j) * c(active_hard[j])));  // compl. slack
        }
    } else {
        residual = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    }
    for (int k = 0; k < m; ++k)
        if (p.rows[k].kind == RowKind::Hard)
            residual = std::max(residual, -c(k));  // primal feasibility
    return residual;
}

}  // namespace cbfsim::qp
