#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dpfl/grid.hpp"

namespace dpfl {

/// Physical meaning of one dataset column.
enum class Quantity {
    Const,  ///< the intercept column of ones
    Pinj,   ///< active power injection at a bus
    Qinj,   ///< reactive power injection at a bus
    Vm,     ///< voltage magnitude at a bus
    Va,     ///< voltage angle at a bus
    Pflow,  ///< active branch flow (id = branch index, reverse = to->from)
    Qflow,  ///< reactive branch flow
    Loss,   ///< active power loss of a branch
    VmSq,   ///< squared voltage magnitude (transform output)
    CosCouple, ///< v_i v_j cos(theta_ij) for a branch
    SinCouple, ///< v_i v_j sin(theta_ij) for a branch
    VaDiff, ///< angle difference across a branch (transform inversion output)
    Lift    ///< appended lifting column (id = basis index)
};

struct VarRole {
    Quantity quantity = Quantity::Const;
    int id = -1;            ///< bus id, branch index, or basis index
    bool reverse = false;   ///< branch orientation for flow quantities

    bool operator==(const VarRole&) const = default;
};

std::string column_name(const VarRole& role);
VarRole parse_column_name(const std::string& name);

/// Variable class used for error reporting; slack injections are reported
/// separately from other buses.
std::string variable_class(const VarRole& role, const GridCase& c);

enum class LiftFunction { RadialExponential, LogRadial };

/// Coordinate-transform annotation carried by a schema so that a trained
/// model knows how to map between physical and transformed spaces.
struct TransformSpec {
    enum class Kind { None, VoltageSquare, VaCoupling, DimensionLift };
    Kind kind = Kind::None;

    // dimension lifting parameters
    LiftFunction f_lift = LiftFunction::RadialExponential;
    double gamma = 1.0;
    int n_lift = 0;
    unsigned long long seed = 0;
    Eigen::MatrixXd bases; ///< one basis point per row, in non-const predictor space
};

struct VariableSchema {
    std::vector<VarRole> predictors; ///< first entry is the constant "1"
    std::vector<VarRole> responses;
    TransformSpec transform;

    int n_x() const { return static_cast<int>(predictors.size()); }
    int n_y() const { return static_cast<int>(responses.size()); }

    int predictor_index(const VarRole& role) const;
    int response_index(const VarRole& role) const;
    /// -1 when absent.
    int find_predictor(const VarRole& role) const;
    int find_response(const VarRole& role) const;

    bool operator==(const VariableSchema&) const;
};

/// Default predictor/response assignment for a case: the knowns are nodal
/// injections at PQ/PV buses plus PV and slack voltage magnitudes; the
/// unknowns are the remaining bus states, slack injections, forward branch
/// flows and per-branch losses. The slack angle is omitted because it is
/// constant and would duplicate the intercept.
VariableSchema default_schema(const GridCase& c);

} // namespace dpfl
