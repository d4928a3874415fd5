#include "cbfsim/intersection1d.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace cbfsim::intersection1d {

namespace {

constexpr double kSingularTol = 1e-12;

struct AgentVel {
    double v = 0.0;
    bool active = false;
};

double barrier(double x1, double x2, double r) { return x1 * x1 + x2 * x2 - r * r; }

// DR/DF agent velocity; effective bandwidth lam (lam = 2*lambda for DF).
AgentVel dr_agent(double xi, double h, double v0i, double lam) {
    AgentVel out;
    if (0.5 * lam * h + 2.0 * xi * v0i >= 0.0) {
        out.v = v0i;
        return out;
    }
    if (std::abs(xi) < kSingularTol)
        throw SingularStateError("dr velocity: x_i ~ 0 in constrained branch");
    out.v = -lam * h / (4.0 * xi);
    out.active = true;
    return out;
}

AgentVel drslack_agent(double xi, double h, double v0i, double lam, double M) {
    AgentVel out;
    if (0.5 * lam * h + 2.0 * xi * v0i >= 0.0) {
        out.v = v0i;
        return out;
    }
    out.v = (v0i / M - xi * lam * h) / (1.0 / M + 4.0 * xi * xi);
    out.active = true;
    return out;
}

}  // namespace

void Corridor1dParams::validate() const {
    if (!(v01 > 0.0) || !(v02 > 0.0)) throw std::invalid_argument("corridor: v0i must be positive");
    if (!(r > 0.0)) throw std::invalid_argument("corridor: r must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("corridor: lambda must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("corridor: tau must be positive");
    if (!(M > 0.0)) throw std::invalid_argument("corridor: M must be positive");
    if (!(dt > 0.0) || !(t_max >= dt)) throw std::invalid_argument("corridor: bad dt/t_max");
}

int state_dim(CorridorPolicy p) { return p == CorridorPolicy::PCCA ? 4 : 2; }

double dr_velocity_1d(double x1, double x2, double v01, const Corridor1dParams& p, bool df) {
    const double h = barrier(x1, x2, p.r);
    const double lam = df ? 2.0 * p.lambda : p.lambda;
    return dr_agent(x1, h, v01, lam).v;
}

Eigen::Vector4d closed_loop_field(const Corridor1dState& s, const Corridor1dParams& p) {
    const double h = barrier(s.x1, s.x2, p.r);
    const double n2 = s.x1 * s.x1 + s.x2 * s.x2;
    Eigen::Vector4d f = Eigen::Vector4d::Zero();

    switch (p.policy) {
        case CorridorPolicy::DF:
        case CorridorPolicy::DR: {
            const double lam = p.policy == CorridorPolicy::DF ? 2.0 * p.lambda : p.lambda;
            f(0) = dr_agent(s.x1, h, p.v01, lam).v;
            f(1) = dr_agent(s.x2, h, p.v02, lam).v;
            break;
        }
        case CorridorPolicy::DRSlack: {
            f(0) = drslack_agent(s.x1, h, p.v01, p.lambda, p.M).v;
            f(1) = drslack_agent(s.x2, h, p.v02, p.lambda, p.M).v;
            break;
        }
        case CorridorPolicy::Centralized: {
            const double mu = p.lambda * h + 2.0 * s.x1 * p.v01 + 2.0 * s.x2 * p.v02;
            if (mu >= 0.0) {
                f(0) = p.v01;
                f(1) = p.v02;
            } else {
                if (n2 < kSingularTol)
                    throw SingularStateError("centralized field: |x|^2 ~ 0");
                f(0) = p.v01 - mu * s.x1 / (2.0 * n2);
                f(1) = p.v02 - mu * s.x2 / (2.0 * n2);
            }
            break;
        }
        case CorridorPolicy::CCS: {
            // rho_i = 1 + x_j^2/x_i^2 with the constraint multiplied through
            // by x_i^2, so neither the test nor the active velocity divides by x_i.
            if (n2 < kSingularTol) throw SingularStateError("ccs field: |x|^2 ~ 0");
            const double test1 = p.lambda * h * s.x1 * s.x1 + 2.0 * s.x1 * p.v01 * n2;
            const double test2 = p.lambda * h * s.x2 * s.x2 + 2.0 * s.x2 * p.v02 * n2;
            f(0) = test1 >= 0.0 ? p.v01 : -p.lambda * h * s.x1 / (2.0 * n2);
            f(1) = test2 >= 0.0 ? p.v02 : -p.lambda * h * s.x2 / (2.0 * n2);
            break;
        }
        case CorridorPolicy::PCCA: {
            if (n2 < kSingularTol) throw SingularStateError("pcca field: |x|^2 ~ 0");
            const double mu1 = p.lambda * h + 2.0 * s.x1 * p.v01 + 2.0 * s.x2 * s.w2;
            const double mu2 = p.lambda * h + 2.0 * s.x2 * p.v02 + 2.0 * s.x1 * s.w1;
            double v11 = p.v01, v12 = 0.0, v22 = p.v02, v21 = 0.0;
            if (mu1 < 0.0) {
                v11 -= mu1 * s.x1 / (2.0 * n2);
                v12 -= mu1 * s.x2 / (2.0 * n2);
            }
            if (mu2 < 0.0) {
                v22 -= mu2 * s.x2 / (2.0 * n2);
                v21 -= mu2 * s.x1 / (2.0 * n2);
            }
            f(0) = v11;
            f(1) = v22;
            f(2) = (-s.w1 + v11 - v21) / p.tau;  // agent 2 observes v1, predicted v21
            f(3) = (-s.w2 + v22 - v12) / p.tau;  // agent 1 observes v2, predicted v12
            break;
        }
    }
    return f;
}

Trajectory1d simulate_1d(const Corridor1dState& initial, const Corridor1dParams& p, bool record) {
    p.validate();
    if (!(initial.x1 < 0.0) || !(initial.x2 < 0.0))
        throw std::invalid_argument("simulate_1d: initial displacements must be negative");

    Trajectory1d traj;
    Corridor1dState s = initial;
    s.t = 0.0;
    if (record) {
        traj.t.push_back(0.0);
        traj.states.push_back(s);
    }

    auto eval = [&](const Corridor1dState& st) { return closed_loop_field(st, p); };
    auto advance = [&](const Corridor1dState& st, const Eigen::Vector4d& k, double scale) {
        Corridor1dState out = st;
        out.x1 += scale * k(0);
        out.x2 += scale * k(1);
        out.w1 += scale * k(2);
        out.w2 += scale * k(3);
        return out;
    };

    double t1_cross = -1.0, t2_cross = -1.0;
    const long n_steps = static_cast<long>(std::llround(p.t_max / p.dt));
    for (long k = 0; k < n_steps; ++k) {
        const double t = k * p.dt;
        const Eigen::Vector4d k1 = eval(s);
        const Eigen::Vector4d k2 = eval(advance(s, k1, 0.5 * p.dt));
        const Eigen::Vector4d k3 = eval(advance(s, k2, 0.5 * p.dt));
        const Eigen::Vector4d k4 = eval(advance(s, k3, p.dt));
        const Eigen::Vector4d slope = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        Corridor1dState next = advance(s, slope, p.dt);
        next.t = t + p.dt;

        if (t1_cross < 0.0 && s.x1 < 0.0 && next.x1 >= 0.0)
            t1_cross = t + p.dt * (-s.x1) / (next.x1 - s.x1);
        if (t2_cross < 0.0 && s.x2 < 0.0 && next.x2 >= 0.0)
            t2_cross = t + p.dt * (-s.x2) / (next.x2 - s.x2);

        s = next;
        if (record) {
            traj.t.push_back(s.t);
            traj.states.push_back(s);
        }
        if (t1_cross >= 0.0 && t2_cross >= 0.0) break;
    }

    traj.clear.t1 = t1_cross >= 0.0 ? t1_cross : p.t_max;
    traj.clear.t2 = t2_cross >= 0.0 ? t2_cross : p.t_max;
    traj.clear.gridlocked = t1_cross < 0.0 && t2_cross < 0.0;
    traj.clear.t_ext = (traj.clear.t1 + initial.x1 / p.v01) + (traj.clear.t2 + initial.x2 / p.v02);
    return traj;
}

namespace {

Eigen::MatrixXd fd_jacobian(const Eigen::VectorXd& point, const Corridor1dParams& p) {
    const int n = static_cast<int>(point.size());
    Eigen::MatrixXd J(n, n);
    auto field_at = [&](const Eigen::VectorXd& x) {
        Corridor1dState s;
        s.x1 = x(0);
        s.x2 = x(1);
        if (n == 4) {
            s.w1 = x(2);
            s.w2 = x(3);
        }
        return closed_loop_field(s, p).head(n).eval();
    };
    for (int k = 0; k < n; ++k) {
        const double step = 1e-6 * (1.0 + std::abs(point(k)));
        Eigen::VectorXd xp = point, xm = point;
        xp(k) += step;
        xm(k) -= step;
        J.col(k) = (field_at(xp) - field_at(xm)) / (2.0 * step);
    }
    return J;
}

Eigen::MatrixXd analytic_dr(const Eigen::VectorXd& xe, double lambda) {
    Eigen::MatrixXd A(2, 2);
    A << -0.5 * lambda, -0.5 * lambda * xe(1) / xe(0),
         -0.5 * lambda * xe(0) / xe(1), -0.5 * lambda;
    return A;
}

Eigen::MatrixXd analytic_centralized(const Eigen::VectorXd& xe, const Corridor1dParams& p) {
    const double n2 = xe.squaredNorm();
    Eigen::MatrixXd A(2, 2);
    A(0, 0) = (-p.lambda * xe(0) * xe(0) - xe(1) * p.v02) / n2;
    A(0, 1) = (-p.lambda * xe(0) * xe(1) + xe(1) * p.v01) / n2;
    A(1, 0) = (-p.lambda * xe(0) * xe(1) + xe(0) * p.v02) / n2;
    A(1, 1) = (-p.lambda * xe(1) * xe(1) - xe(0) * p.v01) / n2;
    return A;
}

// PCCA linearization in the decoupling coordinates, mapped back to the
// original (x1, x2, w1, w2) coordinates.
Eigen::MatrixXd analytic_pcca(const Eigen::VectorXd& pt, const Corridor1dParams& p) {
    const double mu = pt(0) / pt(1);
    const double s = std::sqrt(1.0 + mu * mu);
    Eigen::MatrixXd Ap = Eigen::MatrixXd::Zero(4, 4);
    Ap(0, 0) = (p.v01 + mu * mu * mu * p.v02) / (p.r * mu * s);
    Ap(0, 2) = -mu / s;
    Ap(1, 0) = (p.v01 - mu * p.v02) / (p.r * mu * s);
    Ap(1, 1) = -p.lambda;
    Ap(1, 3) = -mu / s;
    Ap(3, 0) = (p.v01 / mu - p.v02) * s / (p.r * p.tau);
    Ap(3, 3) = -1.0 / p.tau;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(4, 4);
    T(0, 0) = 1.0;  T(0, 1) = -mu;
    T(1, 0) = mu;   T(1, 1) = 1.0;
    T(2, 2) = mu;   T(2, 3) = -1.0;
    T(3, 2) = 1.0;  T(3, 3) = mu;
    return T.inverse() * Ap * T;
}

}  // namespace

Linearization linearize(const Eigen::VectorXd& point, const Corridor1dParams& p) {
    p.validate();
    const int n = state_dim(p.policy);
    if (point.size() != n) throw std::invalid_argument("linearize: point dimension mismatch");

    Corridor1dState s;
    s.x1 = point(0);
    s.x2 = point(1);
    if (n == 4) {
        s.w1 = point(2);
        s.w2 = point(3);
    }
    if (closed_loop_field(s, p).head(n).norm() >= 1e-8)
        throw NotAnEquilibriumError("linearize: field is not zero at the given point");

    Linearization lin;
    lin.jacobian = fd_jacobian(point, p);
    switch (p.policy) {
        case CorridorPolicy::DR:
            lin.analytic = analytic_dr(point, p.lambda);
            break;
        case CorridorPolicy::DF:
            lin.analytic = analytic_dr(point, 2.0 * p.lambda);
            break;
        case CorridorPolicy::Centralized:
            lin.analytic = analytic_centralized(point, p);
            break;
        case CorridorPolicy::PCCA:
            lin.analytic = analytic_pcca(point, p);
            break;
        default:
            break;
    }
    lin.eigenvalues = Eigen::EigenSolver<Eigen::MatrixXd>(lin.jacobian).eigenvalues();
    return lin;
}

EquilibriumReport equilibria(const Corridor1dParams& p) {
    p.validate();
    EquilibriumReport rep;
    std::vector<Eigen::VectorXd>& pts = rep.representative_points;

    auto arc_points = [&]() {
        for (int k = 1; k <= 8; ++k) {
            const double th = M_PI + k * (0.5 * M_PI) / 9.0;
            Eigen::VectorXd x(2);
            x << p.r * std::cos(th), p.r * std::sin(th);
            pts.push_back(x);
        }
    };

    switch (p.policy) {
        case CorridorPolicy::DF:
        case CorridorPolicy::DR:
        case CorridorPolicy::DRSlack:
            rep.shape = EquilibriumShape::Arc;
            arc_points();
            break;
        case CorridorPolicy::CCS:
            rep.shape = EquilibriumShape::ArcPlusAxes;
            arc_points();
            break;
        case CorridorPolicy::Centralized: {
            rep.shape = EquilibriumShape::Point;
            const double vn = std::hypot(p.v01, p.v02);
            Eigen::VectorXd x(2);
            x << -p.v01 * p.r / vn, -p.v02 * p.r / vn;
            pts.push_back(x);
            break;
        }
        case CorridorPolicy::PCCA: {
            rep.shape = EquilibriumShape::Curve1DIn4D;
            const double mus[8] = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
            for (double mu : mus) {
                const double s = std::sqrt(1.0 + mu * mu);
                Eigen::VectorXd x(4);
                x << -mu * p.r / s, -p.r / s, mu * p.v02, p.v01 / mu;
                pts.push_back(x);
            }
            break;
        }
    }

    bool any_pos = false, all_neg = true;
    for (const auto& pt : pts) {
        Corridor1dParams pl = p;
        if (p.policy == CorridorPolicy::DRSlack) pl.policy = CorridorPolicy::DR;  // same arc
        rep.linearizations.push_back(linearize(pt, pl));
        for (int k = 0; k < rep.linearizations.back().eigenvalues.size(); ++k) {
            const double re = rep.linearizations.back().eigenvalues(k).real();
            if (re > 1e-6) any_pos = true;
            if (re > -1e-6) all_neg = false;
        }
    }
    rep.classification = any_pos ? StabilityClass::Unstable
                                 : (all_neg ? StabilityClass::Stable : StabilityClass::DegenerateZero);
    return rep;
}

double conserved_quantity(CorridorPolicy policy, const Trajectory1d& traj) {
    if (traj.states.empty()) throw std::invalid_argument("conserved_quantity: empty trajectory");
    auto value = [&](const Corridor1dState& s) {
        if (policy == CorridorPolicy::CCS) {
            if (!(s.x1 < 0.0) || !(s.x2 < 0.0))
                throw BranchViolationError("conserved_quantity: ccs invariant needs x_i < 0");
            return std::log(-s.x1) - std::log(-s.x2);
        }
        return s.x1 * s.x1 - s.x2 * s.x2;
    };
    const double g0 = value(traj.states.front());
    double drift = 0.0;
    for (const auto& s : traj.states) drift = std::max(drift, std::abs(value(s) - g0));
    return drift;
}

SweepGrid sweep(const Corridor1dParams& p, double x_lo, double x_hi, double v_lo, double v_hi,
                double step, int threads) {
    p.validate();
    SweepGrid g;
    g.nx = static_cast<int>(std::llround((x_hi - x_lo) / step)) + 1;
    g.nv = static_cast<int>(std::llround((v_hi - v_lo) / step)) + 1;
    g.x_start = x_lo;
    g.x_step = step;
    g.v_start = v_lo;
    g.v_step = step;
    g.t_ext.assign(static_cast<size_t>(g.nx) * g.nv, 0.0);
    g.gridlocked.assign(static_cast<size_t>(g.nx) * g.nv, 0);

    auto run_row = [&](int ix) {
        const double x2_0 = x_lo + ix * step;
        for (int iv = 0; iv < g.nv; ++iv) {
            Corridor1dParams pc = p;
            pc.v02 = v_lo + iv * step;
            Corridor1dState s0;
            s0.x1 = g.x1_0;
            s0.x2 = x2_0;
            const auto traj = simulate_1d(s0, pc, /*record=*/false);
            g.t_ext[static_cast<size_t>(ix) * g.nv + iv] = traj.clear.t_ext;
            g.gridlocked[static_cast<size_t>(ix) * g.nv + iv] = traj.clear.gridlocked ? 1 : 0;
        }
    };

    if (threads <= 1) {
        for (int ix = 0; ix < g.nx; ++ix) run_row(ix);
    } else {
        std::atomic<int> next{0};
        auto worker = [&]() {
            while (true) {
                const int ix = next.fetch_add(1);
                if (ix >= g.nx) return;
                run_row(ix);
            }
        };
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    long count = 0;
    for (auto v : g.gridlocked) count += v;
    g.gridlock_fraction = static_cast<double>(count) / static_cast<double>(g.gridlocked.size());
    return g;
}

std::string corridor_policy_name(CorridorPolicy p) {
    switch (p) {
        case CorridorPolicy::DF: return "df";
        case CorridorPolicy::DR: return "dr";
        case CorridorPolicy::DRSlack: return "dr_slack";
        case CorridorPolicy::Centralized: return "centralized";
        case CorridorPolicy::CCS: return "ccs";
        case CorridorPolicy::PCCA: return "pcca";
    }
    return "?";
}

}  // namespace cbfsim::intersection1d
