#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cbfsim/experiments.hpp"

namespace py = pybind11;
using namespace cbfsim;

PYBIND11_MODULE(_cbfsim, m) {
    m.doc() = "Multi-agent collision avoidance: QP safety filters, simulation, analysis";

    // --- qp ---
    py::enum_<qp::RowKind>(m, "RowKind")
        .value("Hard", qp::RowKind::Hard)
        .value("Soft", qp::RowKind::Soft);

    py::class_<qp::ConstraintRow>(m, "ConstraintRow")
        .def(py::init<>())
        .def_readwrite("offset", &qp::ConstraintRow::offset)
        .def_readwrite("gradient", &qp::ConstraintRow::gradient)
        .def_readwrite("kind", &qp::ConstraintRow::kind)
        .def_readwrite("slack_weight", &qp::ConstraintRow::slack_weight);

    py::class_<qp::QpProblem>(m, "QpProblem")
        .def(py::init<>())
        .def_readwrite("dim", &qp::QpProblem::dim)
        .def_readwrite("hessian", &qp::QpProblem::hessian)
        .def_readwrite("linear", &qp::QpProblem::linear)
        .def_readwrite("rows", &qp::QpProblem::rows);

    py::class_<qp::QpSolution>(m, "QpSolution")
        .def_readonly("u", &qp::QpSolution::u)
        .def_readonly("feasible", &qp::QpSolution::feasible)
        .def_readonly("slacks", &qp::QpSolution::slacks)
        .def_readonly("active_set", &qp::QpSolution::active_set)
        .def_readonly("kkt_residual", &qp::QpSolution::kkt_residual);

    m.def("solve_qp", &qp::solve, py::arg("problem"));
    m.def("verify_kkt", &qp::verify_kkt, py::arg("problem"), py::arg("solution"));

    // --- model ---
    py::class_<model::AgentState>(m, "AgentState")
        .def(py::init<>())
        .def(py::init([](const model::Vec2& pos, const model::Vec2& vel) {
                 return model::AgentState{pos, vel};
             }),
             py::arg("pos"), py::arg("vel"))
        .def_readwrite("pos", &model::AgentState::pos)
        .def_readwrite("vel", &model::AgentState::vel);

    py::class_<model::BarrierParams>(m, "BarrierParams")
        .def(py::init<>())
        .def(py::init([](double r, double l0, double l1) {
                 return model::BarrierParams{r, l0, l1};
             }),
             py::arg("r"), py::arg("l0"), py::arg("l1"))
        .def_readwrite("r", &model::BarrierParams::r)
        .def_readwrite("l0", &model::BarrierParams::l0)
        .def_readwrite("l1", &model::BarrierParams::l1)
        .def("lambda1", &model::BarrierParams::lambda1)
        .def("lambda2", &model::BarrierParams::lambda2);

    py::class_<model::PairConstraintTerms>(m, "PairConstraintTerms")
        .def_readonly("a", &model::PairConstraintTerms::a)
        .def_readonly("b", &model::PairConstraintTerms::b)
        .def_readonly("h", &model::PairConstraintTerms::h)
        .def_readonly("hdot", &model::PairConstraintTerms::hdot);

    py::class_<model::LqrGain>(m, "LqrGain")
        .def_readonly("kp", &model::LqrGain::kp)
        .def_readonly("kv", &model::LqrGain::kv);

    m.def("step_agent", &model::step_agent, py::arg("state"), py::arg("u"), py::arg("dt"));
    m.def("pair_constraint", &model::pair_constraint, py::arg("si"), py::arg("sj"),
          py::arg("bp"));
    m.def("lqr_gain", &model::lqr_gain, py::arg("q"), py::arg("r"));
    m.def(
        "baseline_control",
        [](const model::AgentState& s, const model::Vec2& goal, const model::LqrGain& g) {
            return model::baseline_control(s, goal, g);
        },
        py::arg("state"), py::arg("goal"), py::arg("gain"));

    // --- policies ---
    py::enum_<policies::PolicyKind>(m, "PolicyKind")
        .value("Centralized", policies::PolicyKind::Centralized)
        .value("DF", policies::PolicyKind::DF)
        .value("DR", policies::PolicyKind::DR)
        .value("CCS", policies::PolicyKind::CCS)
        .value("PCCA", policies::PolicyKind::PCCA);

    py::enum_<policies::LoopBreakerType>(m, "LoopBreakerType")
        .value("UnitDelay", policies::LoopBreakerType::UnitDelay)
        .value("LowPassFilter", policies::LoopBreakerType::LowPassFilter);

    py::class_<policies::PolicySpec>(m, "PolicySpec")
        .def(py::init<>())
        .def_readwrite("kind", &policies::PolicySpec::kind)
        .def_readwrite("rho", &policies::PolicySpec::rho)
        .def_readwrite("loop_breaker", &policies::PolicySpec::loop_breaker)
        .def_readwrite("tau", &policies::PolicySpec::tau);

    py::class_<policies::PolicyStepOutput>(m, "PolicyStepOutput")
        .def_readonly("controls", &policies::PolicyStepOutput::controls)
        .def_readonly("feasible", &policies::PolicyStepOutput::feasible)
        .def_readonly("constraint_margins", &policies::PolicyStepOutput::constraint_margins);

    py::class_<policies::WorldParams>(m, "WorldParams")
        .def(py::init<>())
        .def_readwrite("bp", &policies::WorldParams::bp)
        .def_readwrite("arena_radius", &policies::WorldParams::arena_radius)
        .def_readwrite("agent_radius", &policies::WorldParams::agent_radius)
        .def_readwrite("arena_slack_weight", &policies::WorldParams::arena_slack_weight)
        .def_readwrite("gain", &policies::WorldParams::gain);

    py::class_<policies::PolicyRunner>(m, "PolicyRunner")
        .def(py::init<const policies::PolicySpec&, const policies::WorldParams&, int>(),
             py::arg("spec"), py::arg("world"), py::arg("n_agents"))
        .def("step", &policies::PolicyRunner::step, py::arg("states"), py::arg("goals"),
             py::arg("dt"));

    m.def("feasible_point", &policies::feasible_point, py::arg("states"), py::arg("bp"));

    // --- sim / montecarlo ---
    py::class_<sim::SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("dt", &sim::SimConfig::dt)
        .def_readwrite("t_max", &sim::SimConfig::t_max)
        .def_readwrite("bp", &sim::SimConfig::bp)
        .def_readwrite("arena_radius", &sim::SimConfig::arena_radius)
        .def_readwrite("agent_radius", &sim::SimConfig::agent_radius);

    py::class_<sim::Scenario>(m, "Scenario")
        .def(py::init<>())
        .def_readwrite("n_agents", &sim::Scenario::n_agents)
        .def_readwrite("starts", &sim::Scenario::starts)
        .def_readwrite("goals", &sim::Scenario::goals)
        .def_readwrite("seed", &sim::Scenario::seed);

    py::class_<sim::TrialMetrics>(m, "TrialMetrics")
        .def_readonly("converged", &sim::TrialMetrics::converged)
        .def_readonly("convergence_time", &sim::TrialMetrics::convergence_time)
        .def_readonly("h_min", &sim::TrialMetrics::h_min)
        .def_readonly("has_pairs", &sim::TrialMetrics::has_pairs)
        .def_readonly("gridlocked", &sim::TrialMetrics::gridlocked)
        .def_readonly("any_infeasible", &sim::TrialMetrics::any_infeasible)
        .def_readonly("failed", &sim::TrialMetrics::failed)
        .def_readonly("error", &sim::TrialMetrics::error);

    m.def(
        "run_trial",
        [](const sim::Scenario& sc, const policies::PolicySpec& spec, const sim::SimConfig& cfg) {
            return sim::run_trial(sc, spec, cfg);
        },
        py::arg("scenario"), py::arg("policy"), py::arg("config"));
    m.def("sample_scenarios", &montecarlo::sample_scenarios, py::arg("n_trials"),
          py::arg("n_agents"), py::arg("config"), py::arg("master_seed"),
          py::arg("cross_kind_check") = false);
    m.def("mix_seed", &montecarlo::mix_seed, py::arg("master"), py::arg("index"));

    // --- intersection1d ---
    py::enum_<intersection1d::CorridorPolicy>(m, "CorridorPolicy")
        .value("DF", intersection1d::CorridorPolicy::DF)
        .value("DR", intersection1d::CorridorPolicy::DR)
        .value("DRSlack", intersection1d::CorridorPolicy::DRSlack)
        .value("Centralized", intersection1d::CorridorPolicy::Centralized)
        .value("CCS", intersection1d::CorridorPolicy::CCS)
        .value("PCCA", intersection1d::CorridorPolicy::PCCA);

    py::class_<intersection1d::Corridor1dParams>(m, "Corridor1dParams")
        .def(py::init<>())
        .def_readwrite("v01", &intersection1d::Corridor1dParams::v01)
        .def_readwrite("v02", &intersection1d::Corridor1dParams::v02)
        .def_readwrite("r", &intersection1d::Corridor1dParams::r)
        .def_readwrite("lambda_", &intersection1d::Corridor1dParams::lambda)
        .def_readwrite("tau", &intersection1d::Corridor1dParams::tau)
        .def_readwrite("M", &intersection1d::Corridor1dParams::M)
        .def_readwrite("dt", &intersection1d::Corridor1dParams::dt)
        .def_readwrite("t_max", &intersection1d::Corridor1dParams::t_max)
        .def_readwrite("policy", &intersection1d::Corridor1dParams::policy);

    py::class_<intersection1d::Corridor1dState>(m, "Corridor1dState")
        .def(py::init<>())
        .def_readwrite("x1", &intersection1d::Corridor1dState::x1)
        .def_readwrite("x2", &intersection1d::Corridor1dState::x2)
        .def_readwrite("w1", &intersection1d::Corridor1dState::w1)
        .def_readwrite("w2", &intersection1d::Corridor1dState::w2)
        .def_readwrite("t", &intersection1d::Corridor1dState::t);

    py::class_<intersection1d::ClearTimes>(m, "ClearTimes")
        .def_readonly("t1", &intersection1d::ClearTimes::t1)
        .def_readonly("t2", &intersection1d::ClearTimes::t2)
        .def_readonly("t_ext", &intersection1d::ClearTimes::t_ext)
        .def_readonly("gridlocked", &intersection1d::ClearTimes::gridlocked);

    py::class_<intersection1d::Trajectory1d>(m, "Trajectory1d")
        .def_readonly("t", &intersection1d::Trajectory1d::t)
        .def_readonly("states", &intersection1d::Trajectory1d::states)
        .def_readonly("clear", &intersection1d::Trajectory1d::clear);

    m.def(
        "closed_loop_field",
        [](const intersection1d::Corridor1dState& s, const intersection1d::Corridor1dParams& p) {
            return intersection1d::closed_loop_field(s, p);
        },
        py::arg("state"), py::arg("params"));
    m.def("simulate_1d", &intersection1d::simulate_1d, py::arg("initial"), py::arg("params"),
          py::arg("record") = true);
}
