#include "dpfl/schema.hpp"
#include "dpfl/error.hpp"

namespace dpfl {

namespace {

const char* quantity_tag(Quantity q) {
    switch (q) {
        case Quantity::Const: return "const";
        case Quantity::Pinj: return "P_inj";
        case Quantity::Qinj: return "Q_inj";
        case Quantity::Vm: return "Vm";
        case Quantity::Va: return "Va";
        case Quantity::Pflow: return "P_flow";
        case Quantity::Qflow: return "Q_flow";
        case Quantity::Loss: return "loss";
        case Quantity::VmSq: return "Vm_sq";
        case Quantity::CosCouple: return "R_couple";
        case Quantity::SinCouple: return "C_couple";
        case Quantity::VaDiff: return "Va_diff";
        case Quantity::Lift: return "lift";
    }
    return "?";
}

} // namespace

std::string column_name(const VarRole& role) {
    if (role.quantity == Quantity::Const) return "const";
    std::string name = std::string(quantity_tag(role.quantity)) + "@" + std::to_string(role.id);
    switch (role.quantity) {
        case Quantity::Pflow:
        case Quantity::Qflow:
            name += role.reverse ? "r" : "f";
            break;
        default:
            break;
    }
    return name;
}

VarRole parse_column_name(const std::string& name) {
    if (name == "const") return VarRole{Quantity::Const, -1, false};
    auto at = name.find('@');
    if (at == std::string::npos) fail("schema", "bad column name: " + name);
    std::string tag = name.substr(0, at);
    std::string rest = name.substr(at + 1);
    VarRole role;
    if (tag == "P_inj") role.quantity = Quantity::Pinj;
    else if (tag == "Q_inj") role.quantity = Quantity::Qinj;
    else if (tag == "Vm") role.quantity = Quantity::Vm;
    else if (tag == "Va") role.quantity = Quantity::Va;
    else if (tag == "P_flow") role.quantity = Quantity::Pflow;
    else if (tag == "Q_flow") role.quantity = Quantity::Qflow;
    else if (tag == "loss") role.quantity = Quantity::Loss;
    else if (tag == "Vm_sq") role.quantity = Quantity::VmSq;
    else if (tag == "R_couple") role.quantity = Quantity::CosCouple;
    else if (tag == "C_couple") role.quantity = Quantity::SinCouple;
    else if (tag == "Va_diff") role.quantity = Quantity::VaDiff;
    else if (tag == "lift") role.quantity = Quantity::Lift;
    else fail("schema", "bad column name: " + name);
    if (role.quantity == Quantity::Pflow || role.quantity == Quantity::Qflow) {
        if (rest.empty()) fail("schema", "bad column name: " + name);
        char dir = rest.back();
        if (dir != 'f' && dir != 'r') fail("schema", "bad column name: " + name);
        role.reverse = dir == 'r';
        rest.pop_back();
    }
    role.id = std::stoi(rest);
    return role;
}

std::string variable_class(const VarRole& role, const GridCase& c) {
    switch (role.quantity) {
        case Quantity::Const: return "const";
        case Quantity::Pinj:
            return c.buses[c.bus_index(role.id)].type == BusType::Slack ? "P_slack" : "P_inj";
        case Quantity::Qinj:
            return c.buses[c.bus_index(role.id)].type == BusType::Slack ? "Q_slack" : "Q_inj";
        case Quantity::Vm: return "Vm";
        case Quantity::VmSq: return "Vm";
        case Quantity::Va: return "Va";
        case Quantity::VaDiff: return "Va";
        case Quantity::Pflow: return "P_flow";
        case Quantity::Qflow: return "Q_flow";
        case Quantity::Loss: return "loss";
        case Quantity::CosCouple: return "R_couple";
        case Quantity::SinCouple: return "C_couple";
        case Quantity::Lift: return "lift";
    }
    return "?";
}

int VariableSchema::predictor_index(const VarRole& role) const {
    int i = find_predictor(role);
    if (i < 0) fail("schema", "predictor not in schema: " + column_name(role));
    return i;
}

int VariableSchema::response_index(const VarRole& role) const {
    int i = find_response(role);
    if (i < 0) fail("schema", "response not in schema: " + column_name(role));
    return i;
}

int VariableSchema::find_predictor(const VarRole& role) const {
    for (size_t i = 0; i < predictors.size(); ++i)
        if (predictors[i] == role) return static_cast<int>(i);
    return -1;
}

int VariableSchema::find_response(const VarRole& role) const {
    for (size_t i = 0; i < responses.size(); ++i)
        if (responses[i] == role) return static_cast<int>(i);
    return -1;
}

bool VariableSchema::operator==(const VariableSchema& o) const {
    return predictors == o.predictors && responses == o.responses &&
           transform.kind == o.transform.kind;
}

VariableSchema default_schema(const GridCase& c) {
    VariableSchema s;
    s.predictors.push_back(VarRole{Quantity::Const, -1, false});
    for (const auto& b : c.buses)
        if (b.type != BusType::Slack) s.predictors.push_back(VarRole{Quantity::Pinj, b.id, false});
    for (const auto& b : c.buses)
        if (b.type == BusType::PQ) s.predictors.push_back(VarRole{Quantity::Qinj, b.id, false});
    for (const auto& b : c.buses)
        if (b.type != BusType::PQ) s.predictors.push_back(VarRole{Quantity::Vm, b.id, false});

    for (const auto& b : c.buses)
        if (b.type == BusType::PQ) s.responses.push_back(VarRole{Quantity::Vm, b.id, false});
    for (const auto& b : c.buses)
        if (b.type != BusType::Slack) s.responses.push_back(VarRole{Quantity::Va, b.id, false});
    const Bus& slack = c.buses[c.slack_index()];
    s.responses.push_back(VarRole{Quantity::Pinj, slack.id, false});
    s.responses.push_back(VarRole{Quantity::Qinj, slack.id, false});
    for (const auto& b : c.buses)
        if (b.type == BusType::PV) s.responses.push_back(VarRole{Quantity::Qinj, b.id, false});
    for (int k = 0; k < c.n_branches(); ++k) {
        s.responses.push_back(VarRole{Quantity::Pflow, k, false});
        s.responses.push_back(VarRole{Quantity::Qflow, k, false});
    }
    for (int k = 0; k < c.n_branches(); ++k)
        s.responses.push_back(VarRole{Quantity::Loss, k, false});
    return s;
}

} // namespace dpfl
