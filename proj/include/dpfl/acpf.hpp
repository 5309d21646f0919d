#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dpfl/grid.hpp"
#include "dpfl/model.hpp"
#include "dpfl/schema.hpp"

namespace dpfl {

/// One solved operating point: bus states plus derived branch flows.
struct BusState {
    Eigen::VectorXd vm;     ///< per-bus voltage magnitude, p.u.
    Eigen::VectorXd va;     ///< per-bus angle, rad
    Eigen::VectorXd p_inj;  ///< per-bus net active injection, p.u.
    Eigen::VectorXd q_inj;  ///< per-bus net reactive injection, p.u.
    Eigen::VectorXd p_from, q_from; ///< per-branch sending-end flows
    Eigen::VectorXd p_to, q_to;     ///< per-branch receiving-end flows
};

/// Solver inputs: specified injections and voltage targets.
struct Injections {
    Eigen::VectorXd p_spec;  ///< per-bus, enforced at non-slack buses
    Eigen::VectorXd q_spec;  ///< per-bus, enforced at PQ buses
    Eigen::VectorXd vm_set;  ///< per-bus, enforced at PV and slack buses
    double slack_va = 0.0;
};

Injections base_injections(const GridCase& c);

struct PowerFlowOptions {
    double tolerance = 1e-8; ///< infinity norm of the mismatch
    int max_iterations = 50;
    std::optional<BusState> warm_start; ///< flat start when absent
};

/// Full Newton-Raphson in polar coordinates.
BusState solve_power_flow(const GridCase& c, const Injections& inj,
                          const PowerFlowOptions& opts = {});

/// Injections and their derivatives at a voltage profile; shared by the
/// solver and the sensitivity analysis.
struct InjectionJacobian {
    Eigen::VectorXd p, q;
    Eigen::MatrixXd dp_dva, dp_dvm, dq_dva, dq_dvm; ///< n_bus x n_bus blocks
};

InjectionJacobian injection_jacobian(const Admittance& Y, const Eigen::VectorXd& vm,
                                     const Eigen::VectorXd& va);

/// Flows of one branch and their derivatives w.r.t. the terminal states.
struct BranchFlow {
    double p = 0, q = 0;
    double dp_dva_i = 0, dp_dva_j = 0, dp_dvm_i = 0, dp_dvm_j = 0;
    double dq_dva_i = 0, dq_dva_j = 0, dq_dvm_i = 0, dq_dvm_j = 0;
};

/// Sending-end flow for the branch seen from terminal i toward terminal j.
BranchFlow branch_flow(const Branch& br, double vm_i, double vm_j, double va_i, double va_j);

struct FluctuationSpec {
    double relative_range = 0.2; ///< multiplicative half-width on loads
    enum class Distribution { Uniform, GaussianTruncated };
    Distribution distribution = Distribution::Uniform;
    bool correlate_pq = true;     ///< one factor per bus keeps the power factor constant
    bool jitter_setpoints = false; ///< randomize generator voltage setpoints
    double setpoint_range = 0.02;  ///< absolute p.u. band for setpoint jitter
    unsigned long long seed = 0;
};

/// Draw random load levels, solve each, discard non-convergent draws
/// (at most 10n attempts). Deterministic given the seed.
std::vector<BusState> sample_operating_points(const GridCase& c, const FluctuationSpec& spec,
                                              int n);

/// Perturbed solver inputs for one draw; exposed for reproducing single draws.
Injections perturb_injections(const GridCase& c, const FluctuationSpec& spec,
                              unsigned long long attempt);

/// First-order sensitivities of the schema's responses w.r.t. its predictors
/// at `base`, from the power-flow Jacobian; exact at the base point.
LinearModel compute_taylor_model(const GridCase& c, const BusState& base,
                                 const VariableSchema& schema);

/// Lossless angle-only branch-flow model P_ij = theta_ij / x_ij with its own
/// schema (predictors: angles of every bus; responses: forward P flows).
LinearModel compute_dc_model(const GridCase& c);

} // namespace dpfl
