#include "dpfl/acpf.hpp"
#include "dpfl/error.hpp"
#include "dpfl/rng.hpp"

#include <Eigen/LU>
#include <cmath>

namespace dpfl {

Injections base_injections(const GridCase& c) {
    const int n = c.n_buses();
    Injections inj;
    inj.p_spec = Eigen::VectorXd::Zero(n);
    inj.q_spec = Eigen::VectorXd::Zero(n);
    inj.vm_set = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
        inj.p_spec(i) = -c.buses[i].pd;
        inj.q_spec(i) = -c.buses[i].qd;
        inj.vm_set(i) = c.buses[i].vm != 0.0 ? c.buses[i].vm : 1.0;
    }
    for (const auto& g : c.gens) {
        const int i = c.bus_index(g.bus);
        inj.p_spec(i) += g.pg;
        inj.q_spec(i) += g.qg;
        inj.vm_set(i) = g.vset;
    }
    inj.slack_va = c.buses[c.slack_index()].va;
    return inj;
}

InjectionJacobian injection_jacobian(const Admittance& Y, const Eigen::VectorXd& vm,
                                     const Eigen::VectorXd& va) {
    const int n = static_cast<int>(vm.size());
    InjectionJacobian out;
    out.p = Eigen::VectorXd::Zero(n);
    out.q = Eigen::VectorXd::Zero(n);
    out.dp_dva = Eigen::MatrixXd::Zero(n, n);
    out.dp_dvm = Eigen::MatrixXd::Zero(n, n);
    out.dq_dva = Eigen::MatrixXd::Zero(n, n);
    out.dq_dvm = Eigen::MatrixXd::Zero(n, n);

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double g = Y.G(i, j), b = Y.B(i, j);
            if (g == 0.0 && b == 0.0) continue;
            const double th = va(i) - va(j);
            const double ct = std::cos(th), st = std::sin(th);
            out.p(i) += vm(i) * vm(j) * (g * ct + b * st);
            out.q(i) += vm(i) * vm(j) * (g * st - b * ct);
            if (i != j) {
                out.dp_dva(i, j) = vm(i) * vm(j) * (g * st - b * ct);
                out.dp_dvm(i, j) = vm(i) * (g * ct + b * st);
                out.dq_dva(i, j) = -vm(i) * vm(j) * (g * ct + b * st);
                out.dq_dvm(i, j) = vm(i) * (g * st - b * ct);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const double gii = Y.G(i, i), bii = Y.B(i, i);
        out.dp_dva(i, i) = -out.q(i) - bii * vm(i) * vm(i);
        out.dp_dvm(i, i) = out.p(i) / vm(i) + gii * vm(i);
        out.dq_dva(i, i) = out.p(i) - gii * vm(i) * vm(i);
        out.dq_dvm(i, i) = out.q(i) / vm(i) - bii * vm(i);
    }
    return out;
}

BranchFlow branch_flow(const Branch& br, double vm_i, double vm_j, double va_i, double va_j) {
    const double den = br.r * br.r + br.x * br.x;
    const double g = br.r / den, bs = -br.x / den;
    const double bc = br.b / 2.0;
    const double th = va_i - va_j;
    const double ct = std::cos(th), st = std::sin(th);

    BranchFlow f;
    f.p = g * vm_i * vm_i - vm_i * vm_j * (g * ct + bs * st);
    f.q = -(bs + bc) * vm_i * vm_i - vm_i * vm_j * (g * st - bs * ct);

    f.dp_dvm_i = 2.0 * g * vm_i - vm_j * (g * ct + bs * st);
    f.dp_dvm_j = -vm_i * (g * ct + bs * st);
    f.dp_dva_i = vm_i * vm_j * (g * st - bs * ct);
    f.dp_dva_j = -vm_i * vm_j * (g * st - bs * ct);

    f.dq_dvm_i = -2.0 * (bs + bc) * vm_i - vm_j * (g * st - bs * ct);
    f.dq_dvm_j = -vm_i * (g * st - bs * ct);
    f.dq_dva_i = -vm_i * vm_j * (g * ct + bs * st);
    f.dq_dva_j = vm_i * vm_j * (g * ct + bs * st);
    return f;
}

namespace {

void fill_branch_flows(const GridCase& c, BusState& s) {
    const int m = c.n_branches();
    s.p_from.resize(m);
    s.q_from.resize(m);
    s.p_to.resize(m);
    s.q_to.resize(m);
    for (int k = 0; k < m; ++k) {
        const auto& br = c.branches[k];
        if (!br.in_service) {
            s.p_from(k) = s.q_from(k) = s.p_to(k) = s.q_to(k) = 0.0;
            continue;
        }
        const int i = c.bus_index(br.from), j = c.bus_index(br.to);
        BranchFlow fwd = branch_flow(br, s.vm(i), s.vm(j), s.va(i), s.va(j));
        BranchFlow rev = branch_flow(br, s.vm(j), s.vm(i), s.va(j), s.va(i));
        s.p_from(k) = fwd.p;
        s.q_from(k) = fwd.q;
        s.p_to(k) = rev.p;
        s.q_to(k) = rev.q;
    }
}

} // namespace

BusState solve_power_flow(const GridCase& c, const Injections& inj, const PowerFlowOptions& opts) {
    const int n = c.n_buses();
    const int slack = c.slack_index();
    const Admittance Y = build_admittance(c);

    std::vector<int> va_vars, vm_vars; // unknown coordinates
    for (int i = 0; i < n; ++i)
        if (i != slack) va_vars.push_back(i);
    for (int i = 0; i < n; ++i)
        if (c.buses[i].type == BusType::PQ) vm_vars.push_back(i);
    const int n_va = static_cast<int>(va_vars.size());
    const int n_vm = static_cast<int>(vm_vars.size());
    const int n_eq = n_va + n_vm;

    Eigen::VectorXd vm, va;
    if (opts.warm_start) {
        vm = opts.warm_start->vm;
        va = opts.warm_start->va;
    } else {
        vm = Eigen::VectorXd::Ones(n);
        va = Eigen::VectorXd::Zero(n);
    }
    for (int i = 0; i < n; ++i)
        if (c.buses[i].type != BusType::PQ) vm(i) = inj.vm_set(i);
    va(slack) = inj.slack_va;

    for (int it = 0; it <= opts.max_iterations; ++it) {
        InjectionJacobian jac = injection_jacobian(Y, vm, va);

        Eigen::VectorXd mismatch(n_eq);
        for (int a = 0; a < n_va; ++a) mismatch(a) = jac.p(va_vars[a]) - inj.p_spec(va_vars[a]);
        for (int b = 0; b < n_vm; ++b)
            mismatch(n_va + b) = jac.q(vm_vars[b]) - inj.q_spec(vm_vars[b]);

        const double err = n_eq > 0 ? mismatch.lpNorm<Eigen::Infinity>() : 0.0;
        if (!std::isfinite(err) || err > 1e8)
            fail("non-convergence", "power flow diverged (mismatch " + std::to_string(err) + ")");
        if (err < opts.tolerance) {
            BusState s;
            s.vm = vm;
            s.va = va;
            s.p_inj = jac.p;
            s.q_inj = jac.q;
            fill_branch_flows(c, s);
            return s;
        }
        if (it == opts.max_iterations) break;

        Eigen::MatrixXd J(n_eq, n_eq);
        for (int a = 0; a < n_va; ++a) {
            for (int b = 0; b < n_va; ++b) J(a, b) = jac.dp_dva(va_vars[a], va_vars[b]);
            for (int b = 0; b < n_vm; ++b) J(a, n_va + b) = jac.dp_dvm(va_vars[a], vm_vars[b]);
        }
        for (int a = 0; a < n_vm; ++a) {
            for (int b = 0; b < n_va; ++b) J(n_va + a, b) = jac.dq_dva(vm_vars[a], va_vars[b]);
            for (int b = 0; b < n_vm; ++b)
                J(n_va + a, n_va + b) = jac.dq_dvm(vm_vars[a], vm_vars[b]);
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) fail("singular-jacobian", "singular power flow Jacobian");
        Eigen::VectorXd step = lu.solve(-mismatch);
        for (int a = 0; a < n_va; ++a) va(va_vars[a]) += step(a);
        for (int b = 0; b < n_vm; ++b) vm(vm_vars[b]) += step(n_va + b);
    }
    fail("non-convergence", "power flow did not converge within " +
                                std::to_string(opts.max_iterations) + " iterations");
}

Injections perturb_injections(const GridCase& c, const FluctuationSpec& spec,
                              unsigned long long attempt) {
    if (spec.relative_range < 0.0 || spec.relative_range >= 1.0)
        fail("invalid-argument", "relative_range must lie in [0, 1)");
    Rng rng(derive_seed(spec.seed, attempt));
    auto draw_unit = [&]() {
        if (spec.distribution == FluctuationSpec::Distribution::Uniform)
            return rng.uniform(-1.0, 1.0);
        return std::clamp(rng.normal(0.0, 1.0 / 3.0), -1.0, 1.0);
    };

    Injections inj = base_injections(c);
    for (int i = 0; i < c.n_buses(); ++i) {
        const auto& b = c.buses[i];
        if (b.pd == 0.0 && b.qd == 0.0) continue;
        const double up = draw_unit();
        const double uq = spec.correlate_pq ? up : draw_unit();
        inj.p_spec(i) += b.pd - b.pd * (1.0 + spec.relative_range * up);
        inj.q_spec(i) += b.qd - b.qd * (1.0 + spec.relative_range * uq);
    }
    if (spec.jitter_setpoints) {
        for (int i = 0; i < c.n_buses(); ++i)
            if (c.buses[i].type != BusType::PQ)
                inj.vm_set(i) += spec.setpoint_range * draw_unit();
    }
    return inj;
}

std::vector<BusState> sample_operating_points(const GridCase& c, const FluctuationSpec& spec,
                                              int n) {
    if (n < 1) fail("invalid-argument", "sample count must be at least 1");
    std::vector<BusState> out;
    out.reserve(n);
    const unsigned long long max_attempts = 10ull * static_cast<unsigned long long>(n);
    for (unsigned long long attempt = 0; attempt < max_attempts && (int)out.size() < n;
         ++attempt) {
        Injections inj = perturb_injections(c, spec, attempt);
        try {
            out.push_back(solve_power_flow(c, inj));
        } catch (const Error& e) {
            if (e.kind() != "non-convergence" && e.kind() != "singular-jacobian") throw;
        }
    }
    if ((int)out.size() < n)
        fail("sampling", "only " + std::to_string(out.size()) + " of " + std::to_string(n) +
                             " draws converged within the attempt cap");
    return out;
}

namespace {

// Row of d(response)/d(full state) for one response role; full state is
// (va_0..n-1, vm_0..n-1).
Eigen::RowVectorXd response_state_gradient(const GridCase& c, const VarRole& role,
                                           const InjectionJacobian& jac, const BusState& base) {
    const int n = c.n_buses();
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(2 * n);
    auto add_flow = [&](int k, bool reverse, bool reactive, double sign) {
        const auto& br = c.branches[k];
        if (!br.in_service) return;
        int i = c.bus_index(br.from), j = c.bus_index(br.to);
        if (reverse) std::swap(i, j);
        BranchFlow f = branch_flow(br, base.vm(i), base.vm(j), base.va(i), base.va(j));
        const double dva_i = reactive ? f.dq_dva_i : f.dp_dva_i;
        const double dva_j = reactive ? f.dq_dva_j : f.dp_dva_j;
        const double dvm_i = reactive ? f.dq_dvm_i : f.dp_dvm_i;
        const double dvm_j = reactive ? f.dq_dvm_j : f.dp_dvm_j;
        g(i) += sign * dva_i;
        g(j) += sign * dva_j;
        g(n + i) += sign * dvm_i;
        g(n + j) += sign * dvm_j;
    };
    switch (role.quantity) {
        case Quantity::Vm:
            g(n + c.bus_index(role.id)) = 1.0;
            break;
        case Quantity::Va:
            g(c.bus_index(role.id)) = 1.0;
            break;
        case Quantity::Pinj: {
            const int i = c.bus_index(role.id);
            g.head(n) = jac.dp_dva.row(i);
            g.tail(n) = jac.dp_dvm.row(i);
            break;
        }
        case Quantity::Qinj: {
            const int i = c.bus_index(role.id);
            g.head(n) = jac.dq_dva.row(i);
            g.tail(n) = jac.dq_dvm.row(i);
            break;
        }
        case Quantity::Pflow:
            add_flow(role.id, role.reverse, false, 1.0);
            break;
        case Quantity::Qflow:
            add_flow(role.id, role.reverse, true, 1.0);
            break;
        case Quantity::Loss:
            add_flow(role.id, false, false, 1.0);
            add_flow(role.id, true, false, 1.0);
            break;
        default:
            fail("schema", "unsupported response for sensitivity analysis: " + column_name(role));
    }
    return g;
}

double response_base_value(const GridCase& c, const VarRole& role, const BusState& base) {
    switch (role.quantity) {
        case Quantity::Vm: return base.vm(c.bus_index(role.id));
        case Quantity::Va: return base.va(c.bus_index(role.id));
        case Quantity::Pinj: return base.p_inj(c.bus_index(role.id));
        case Quantity::Qinj: return base.q_inj(c.bus_index(role.id));
        case Quantity::Pflow: return role.reverse ? base.p_to(role.id) : base.p_from(role.id);
        case Quantity::Qflow: return role.reverse ? base.q_to(role.id) : base.q_from(role.id);
        case Quantity::Loss: return base.p_from(role.id) + base.p_to(role.id);
        default: fail("schema", "unsupported response: " + column_name(role));
    }
}

double predictor_base_value(const GridCase& c, const VarRole& role, const BusState& base) {
    switch (role.quantity) {
        case Quantity::Const: return 1.0;
        case Quantity::Pinj: return base.p_inj(c.bus_index(role.id));
        case Quantity::Qinj: return base.q_inj(c.bus_index(role.id));
        case Quantity::Vm: return base.vm(c.bus_index(role.id));
        case Quantity::Va: return base.va(c.bus_index(role.id));
        default: fail("schema", "unsupported predictor: " + column_name(role));
    }
}

} // namespace

LinearModel compute_taylor_model(const GridCase& c, const BusState& base,
                                 const VariableSchema& schema) {
    const int n = c.n_buses();
    const int slack = c.slack_index();
    const Admittance Y = build_admittance(c);
    InjectionJacobian jac = injection_jacobian(Y, base.vm, base.va);

    std::vector<int> va_vars, vm_vars;
    for (int i = 0; i < n; ++i)
        if (i != slack) va_vars.push_back(i);
    for (int i = 0; i < n; ++i)
        if (c.buses[i].type == BusType::PQ) vm_vars.push_back(i);
    const int n_va = static_cast<int>(va_vars.size());
    const int n_vm = static_cast<int>(vm_vars.size());
    const int n_eq = n_va + n_vm;

    // Power-flow Jacobian w.r.t. the unknown coordinates.
    Eigen::MatrixXd J(n_eq, n_eq);
    for (int a = 0; a < n_va; ++a) {
        for (int b = 0; b < n_va; ++b) J(a, b) = jac.dp_dva(va_vars[a], va_vars[b]);
        for (int b = 0; b < n_vm; ++b) J(a, n_va + b) = jac.dp_dvm(va_vars[a], vm_vars[b]);
    }
    for (int a = 0; a < n_vm; ++a) {
        for (int b = 0; b < n_va; ++b) J(n_va + a, b) = jac.dq_dva(vm_vars[a], va_vars[b]);
        for (int b = 0; b < n_vm; ++b) J(n_va + a, n_va + b) = jac.dq_dvm(vm_vars[a], vm_vars[b]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) fail("singular-jacobian", "singular Jacobian at the base point");

    auto p_row = [&](int bus) {
        for (int a = 0; a < n_va; ++a)
            if (va_vars[a] == bus) return a;
        fail("schema", "active injection at the slack bus is not a valid predictor");
    };
    auto q_row = [&](int bus) {
        for (int b = 0; b < n_vm; ++b)
            if (vm_vars[b] == bus) return n_va + b;
        fail("schema", "reactive injection predictor requires a PQ bus");
    };

    // dF/dp for every non-constant predictor.
    const int n_x = schema.n_x();
    Eigen::MatrixXd dF(n_eq, n_x);
    dF.setZero();
    for (int p = 0; p < n_x; ++p) {
        const VarRole& role = schema.predictors[p];
        switch (role.quantity) {
            case Quantity::Const:
                break;
            case Quantity::Pinj:
                dF(p_row(c.bus_index(role.id)), p) = -1.0;
                break;
            case Quantity::Qinj:
                dF(q_row(c.bus_index(role.id)), p) = -1.0;
                break;
            case Quantity::Vm: {
                const int k = c.bus_index(role.id);
                if (c.buses[k].type == BusType::PQ)
                    fail("schema", "PQ-bus voltage cannot be a predictor");
                for (int a = 0; a < n_va; ++a) dF(a, p) = jac.dp_dvm(va_vars[a], k);
                for (int b = 0; b < n_vm; ++b) dF(n_va + b, p) = jac.dq_dvm(vm_vars[b], k);
                break;
            }
            case Quantity::Va: {
                const int k = c.bus_index(role.id);
                if (k != slack) fail("schema", "only the slack angle can be a predictor");
                for (int a = 0; a < n_va; ++a) dF(a, p) = jac.dp_dva(va_vars[a], k);
                for (int b = 0; b < n_vm; ++b) dF(n_va + b, p) = jac.dq_dva(vm_vars[b], k);
                break;
            }
            default:
                fail("schema", "unsupported predictor for sensitivity analysis: " +
                                   column_name(role));
        }
    }
    const Eigen::MatrixXd du = lu.solve(-dF); // n_eq x n_x

    // Full-state sensitivity (va_0.., vm_0..) per predictor.
    Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(2 * n, n_x);
    for (int a = 0; a < n_va; ++a) ds.row(va_vars[a]) = du.row(a);
    for (int b = 0; b < n_vm; ++b) ds.row(n + vm_vars[b]) = du.row(n_va + b);
    for (int p = 0; p < n_x; ++p) {
        const VarRole& role = schema.predictors[p];
        if (role.quantity == Quantity::Vm) ds(n + c.bus_index(role.id), p) += 1.0;
        if (role.quantity == Quantity::Va) ds(c.bus_index(role.id), p) += 1.0;
    }

    const int n_y = schema.n_y();
    LinearModel m;
    m.beta = Eigen::MatrixXd::Zero(n_x, n_y);
    Eigen::VectorXd y_base(n_y), x_base(n_x);
    for (int p = 0; p < n_x; ++p) x_base(p) = predictor_base_value(c, schema.predictors[p], base);
    for (int r = 0; r < n_y; ++r) {
        const VarRole& role = schema.responses[r];
        y_base(r) = response_base_value(c, role, base);
        Eigen::RowVectorXd grad = response_state_gradient(c, role, jac, base);
        m.beta.col(r) = (grad * ds).transpose();
    }
    // Intercept pins the model to the base point exactly.
    m.beta.row(0) = (y_base - m.beta.transpose() * x_base).transpose() +
                    m.beta.row(0) * x_base(0);
    m.schema = schema;
    m.metadata["trainer"] = "taylor";
    return m;
}

LinearModel compute_dc_model(const GridCase& c) {
    VariableSchema s;
    s.predictors.push_back(VarRole{Quantity::Const, -1, false});
    for (const auto& b : c.buses) s.predictors.push_back(VarRole{Quantity::Va, b.id, false});
    for (int k = 0; k < c.n_branches(); ++k)
        if (c.branches[k].in_service) s.responses.push_back(VarRole{Quantity::Pflow, k, false});

    LinearModel m;
    m.beta = Eigen::MatrixXd::Zero(s.n_x(), s.n_y());
    for (int r = 0; r < s.n_y(); ++r) {
        const auto& br = c.branches[s.responses[r].id];
        if (br.x == 0.0) fail("zero-reactance", "DC model requires nonzero branch reactance");
        const int pi = s.predictor_index(VarRole{Quantity::Va, br.from, false});
        const int pj = s.predictor_index(VarRole{Quantity::Va, br.to, false});
        m.beta(pi, r) = 1.0 / br.x;
        m.beta(pj, r) = -1.0 / br.x;
    }
    m.schema = s;
    m.metadata["trainer"] = "dc";
    return m;
}

} // namespace dpfl
