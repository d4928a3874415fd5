#include "cbfsim/model.hpp"

#include <cmath>

namespace cbfsim::model {

double BarrierParams::lambda1() const {
    return 0.5 * (l1 + std::sqrt(l1 * l1 - 4.0 * l0));
}

double BarrierParams::lambda2() const {
    return 0.5 * (l1 - std::sqrt(l1 * l1 - 4.0 * l0));
}

void BarrierParams::validate() const {
    if (!(l0 > 0.0) || !(l1 > 0.0))
        throw std::invalid_argument("barrier params: l0, l1 must be positive");
    if (l1 * l1 < 4.0 * l0)
        throw std::invalid_argument("barrier params: l1^2 >= 4 l0 required for real roots");
    if (!(r > 0.0))
        throw std::invalid_argument("barrier params: r must be positive");
}

AgentState step_agent(const AgentState& s, const Vec2& u, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_agent: dt must be positive");
    if (!s.pos.allFinite() || !s.vel.allFinite() || !u.allFinite())
        throw NonFiniteInputError("step_agent: non-finite input");
    AgentState out;
    out.pos = s.pos + s.vel * dt + 0.5 * dt * dt * u;
    out.vel = s.vel + u * dt;
    return out;
}

PairConstraintTerms pair_constraint(const AgentState& si, const AgentState& sj,
                                    const BarrierParams& bp) {
    if (!si.pos.allFinite() || !si.vel.allFinite() || !sj.pos.allFinite() || !sj.vel.allFinite())
        throw NonFiniteInputError("pair_constraint: non-finite state");
    const Vec2 xi = si.pos - sj.pos;
    if (xi.norm() < 1e-9)
        throw CoincidentAgentsError("pair_constraint: agents coincide, constraint direction undefined");
    const Vec2 vij = si.vel - sj.vel;
    PairConstraintTerms t;
    t.h = xi.squaredNorm() - bp.r * bp.r;
    t.hdot = 2.0 * xi.dot(vij);
    t.a = 2.0 * vij.squaredNorm() + bp.l1 * t.hdot + bp.l0 * t.h;
    t.b = 2.0 * xi;
    return t;
}

qp::ConstraintRow arena_constraint(const AgentState& s, double arena_radius,
                                   double agent_radius, const BarrierParams& bp,
                                   double slack_weight) {
    if (!(arena_radius > agent_radius))
        throw std::invalid_argument("arena_constraint: arena_radius must exceed agent_radius");
    const double reach = arena_radius - agent_radius;
    const double hw = reach * reach - s.pos.squaredNorm();
    const double hw_dot = -2.0 * s.pos.dot(s.vel);
    qp::ConstraintRow row;
    // hddot_w = -2|v|^2 - 2 p.u, so the constant part of the barrier row is
    // -2|v|^2 + l1*hdot_w + l0*h_w with gradient -2 p.
    row.offset = -2.0 * s.vel.squaredNorm() + bp.l1 * hw_dot + bp.l0 * hw;
    row.gradient = -2.0 * s.pos;
    row.kind = qp::RowKind::Soft;
    row.slack_weight = slack_weight;
    return row;
}

LqrGain lqr_gain(double q, double r) {
    if (!(q > 0.0) || !(r > 0.0))
        throw NonPositiveWeightsError("lqr_gain: weights must be positive");
    // Closed-form CARE solution for the per-axis double integrator:
    // p2 = sqrt(q r), p3 = sqrt(r (2 p2 + q)), K = [p2/r, p3/r].
    const double p2 = std::sqrt(q * r);
    const double p3 = std::sqrt(r * (2.0 * p2 + q));
    LqrGain g;
    g.kp = p2 / r;
    g.kv = p3 / r;
    return g;
}

Vec2 baseline_control(const AgentState& s, const Vec2& goal, const LqrGain& g,
                      std::optional<double> accel_cap) {
    Vec2 u = -g.kp * (s.pos - goal) - g.kv * s.vel;
    if (accel_cap) {
        const double n = u.norm();
        if (n > *accel_cap) u *= *accel_cap / n;
    }
    return u;
}

}  // namespace cbfsim::model
