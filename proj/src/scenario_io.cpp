#include "swarm_nmpc/scenario_io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace swarm_nmpc {

namespace {

using nlohmann::ordered_json;

void require_keys(const ordered_json& obj, const std::string& where,
                  const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
    if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) throw ScenarioError(where + ": unknown key '" + key + "'");
    }
    for (const std::string& key : required) {
        if (!obj.contains(key)) throw ScenarioError(where + ": missing key '" + key + "'");
    }
}

double number_at(const ordered_json& obj, const std::string& where, const std::string& key) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ScenarioError(where + "." + key + ": expected a number");
    return v.get<double>();
}

Vec vector_at(const ordered_json& obj, const std::string& where, const std::string& key) {
    const auto& v = obj.at(key);
    if (!v.is_array() || v.empty()) throw ScenarioError(where + "." + key + ": expected an array");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ScenarioError(where + "." + key + ": expected numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

Mat matrix_at(const ordered_json& obj, const std::string& where, const std::string& key) {
    const auto& v = obj.at(key);
    if (!v.is_array() || v.empty() || !v[0].is_array()) {
        throw ScenarioError(where + "." + key + ": expected a row-major nested array");
    }
    const std::size_t rows = v.size();
    const std::size_t cols = v[0].size();
    Mat out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!v[r].is_array() || v[r].size() != cols) {
            throw ScenarioError(where + "." + key + ": ragged matrix");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                v[r][c].get<double>();
        }
    }
    return out;
}

Ball ball_at(const ordered_json& obj, const std::string& where) {
    require_keys(obj, where, {"center", "radius"}, {"center", "radius"});
    return Ball(vector_at(obj, where, "center"), number_at(obj, where, "radius"));
}

std::shared_ptr<const DynamicsModel> model_at(const ordered_json& obj, const std::string& where,
                                              double input_bound) {
    require_keys(obj, where, {"type", "lipschitz", "dim"}, {"type", "lipschitz"});
    const std::string type = obj.at("type").get<std::string>();
    const double lipschitz = number_at(obj, where, "lipschitz");
    if (type == "unicycle") {
        return make_unicycle_model(lipschitz, input_bound);
    }
    if (type == "single_integrator") {
        if (!obj.contains("dim")) throw ScenarioError(where + ": single_integrator needs 'dim'");
        return make_single_integrator_model(obj.at("dim").get<int>(), lipschitz, input_bound);
    }
    throw ScenarioError(where + ": unknown model type '" + type + "'");
}

ordered_json vec_to_json(const Vec& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

ordered_json mat_to_json(const Mat& m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

}  // namespace

ScenarioBundle parse_scenario(const ordered_json& doc) {
    require_keys(doc, "scenario",
                 {"workspace", "obstacles", "agents", "controller", "solver", "sim"},
                 {"workspace", "agents", "controller", "sim"});

    ScenarioBundle bundle;
    Scenario& sc = bundle.scenario;
    sc.workspace = ball_at(doc.at("workspace"), "workspace");

    if (doc.contains("obstacles")) {
        const auto& arr = doc.at("obstacles");
        if (!arr.is_array()) throw ScenarioError("obstacles: expected an array");
        for (std::size_t l = 0; l < arr.size(); ++l) {
            sc.obstacles.push_back(ball_at(arr[l], "obstacles[" + std::to_string(l) + "]"));
        }
    }

    const auto& agents = doc.at("agents");
    if (!agents.is_array() || agents.empty()) throw ScenarioError("agents: expected a nonempty array");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string where = "agents[" + std::to_string(i) + "]";
        const auto& a = agents[i];
        require_keys(a, where,
                     {"id", "model", "radius", "sensing_range", "neighbors", "start", "goal",
                      "u_max", "w_max"},
                     {"id", "model", "radius", "sensing_range", "neighbors", "start", "goal",
                      "u_max", "w_max"});
        AgentSpec spec;
        spec.id = a.at("id").get<int>();
        spec.body_radius = number_at(a, where, "radius");
        spec.sensing_range = number_at(a, where, "sensing_range");
        for (const auto& n : a.at("neighbors")) spec.neighbors.push_back(n.get<int>());
        spec.start = vector_at(a, where, "start");
        spec.goal = vector_at(a, where, "goal");
        spec.input_bound = number_at(a, where, "u_max");
        spec.disturbance_bound = number_at(a, where, "w_max");
        spec.model = model_at(a.at("model"), where + ".model", spec.input_bound);
        sc.agents.push_back(std::move(spec));
    }

    const auto& ctl = doc.at("controller");
    require_keys(ctl, "controller",
                 {"Q", "R", "P", "h", "T_p", "eps", "eps_psi", "eps_omega", "K"},
                 {"Q", "R", "h", "T_p", "eps"});
    const Mat Q = matrix_at(ctl, "controller", "Q");
    const Mat R = matrix_at(ctl, "controller", "R");
    const double h = number_at(ctl, "controller", "h");
    const double horizon = number_at(ctl, "controller", "T_p");
    sc.clearance = number_at(ctl, "controller", "eps");

    Mat P;
    Mat K;
    double eps_psi = 0.0;
    double eps_omega = 0.0;
    const bool terminal_given =
        ctl.contains("P") && ctl.contains("K") && ctl.contains("eps_psi") && ctl.contains("eps_omega");
    if (terminal_given) {
        P = matrix_at(ctl, "controller", "P");
        K = matrix_at(ctl, "controller", "K");
        eps_psi = number_at(ctl, "controller", "eps_psi");
        eps_omega = number_at(ctl, "controller", "eps_omega");
    } else if (ctl.contains("P") || ctl.contains("K") || ctl.contains("eps_psi") ||
               ctl.contains("eps_omega")) {
        throw ScenarioError(
            "controller: terminal ingredients P, K, eps_psi, eps_omega must be given together "
            "or all omitted (omitted means they are designed from the linearization)");
    }

    validate_scenario(sc);

    for (const AgentSpec& a : sc.agents) {
        if (!terminal_given) {
            ErrorDynamics ed(a.model, a.goal);
            const TerminalDesign design =
                design_terminal_ingredients(ed, Q, R, a.input_bound, h);
            if (!design.stabilizable) {
                throw ScenarioError(
                    "controller: terminal design failed for agent " + std::to_string(a.id) +
                    " (linearization not stabilizable); supply P, K, eps_psi, eps_omega");
            }
            bundle.configs.emplace(a.id, make_fhocp_config(Q, R, design.P, h, horizon,
                                                           design.eps_psi, design.eps_omega,
                                                           design.K));
        } else {
            bundle.configs.emplace(
                a.id, make_fhocp_config(Q, R, P, h, horizon, eps_psi, eps_omega, K));
        }
    }

    SolverSettings st;
    st.tol_terminal = bundle.configs.begin()->second.eps_omega / 100.0;
    if (doc.contains("solver")) {
        const auto& sv = doc.at("solver");
        require_keys(sv, "solver",
                     {"max_outer", "penalty_initial", "penalty_growth", "penalty_cap",
                      "max_inner", "step_initial", "step_grow", "step_shrink", "max_linesearch",
                      "armijo", "tol_stationarity", "tol_violation", "tol_terminal", "fd_step",
                      "tightening_cap"},
                     {});
        if (sv.contains("max_outer")) st.max_outer = sv.at("max_outer").get<int>();
        if (sv.contains("penalty_initial")) st.penalty_initial = number_at(sv, "solver", "penalty_initial");
        if (sv.contains("penalty_growth")) st.penalty_growth = number_at(sv, "solver", "penalty_growth");
        if (sv.contains("penalty_cap")) st.penalty_cap = number_at(sv, "solver", "penalty_cap");
        if (sv.contains("max_inner")) st.max_inner = sv.at("max_inner").get<int>();
        if (sv.contains("step_initial")) st.step_initial = number_at(sv, "solver", "step_initial");
        if (sv.contains("step_grow")) st.step_grow = number_at(sv, "solver", "step_grow");
        if (sv.contains("step_shrink")) st.step_shrink = number_at(sv, "solver", "step_shrink");
        if (sv.contains("max_linesearch")) st.max_linesearch = sv.at("max_linesearch").get<int>();
        if (sv.contains("armijo")) st.armijo = number_at(sv, "solver", "armijo");
        if (sv.contains("tol_stationarity")) st.tol_stationarity = number_at(sv, "solver", "tol_stationarity");
        if (sv.contains("tol_violation")) st.tol_violation = number_at(sv, "solver", "tol_violation");
        if (sv.contains("tol_terminal")) st.tol_terminal = number_at(sv, "solver", "tol_terminal");
        if (sv.contains("fd_step")) st.fd_step = number_at(sv, "solver", "fd_step");
        if (sv.contains("tightening_cap")) st.tightening_cap = number_at(sv, "solver", "tightening_cap");
    }
    validate_settings(st);
    if (st.tol_violation > sc.clearance / 10.0) {
        throw ScenarioError("solver.tol_violation must be <= eps/10");
    }
    bundle.solver = st;

    const auto& sim = doc.at("sim");
    require_keys(sim, "sim",
                 {"duration", "seed", "disturbance_mode", "mode", "round_order", "round_policy"},
                 {"duration", "seed", "disturbance_mode", "mode"});
    const double duration = number_at(sim, "sim", "duration");
    const double rounds_real = duration / h;
    const long rounds = std::lround(rounds_real);
    if (rounds < 1 || std::abs(rounds_real - rounds) > 1e-9 * rounds_real) {
        throw ScenarioError("sim.duration must be a positive integer multiple of h");
    }
    bundle.sim_options.rounds = static_cast<int>(rounds);
    bundle.sim_options.seed = sim.at("seed").get<std::uint64_t>();
    bundle.sim_options.disturbance_mode =
        disturbance_mode_from_string(sim.at("disturbance_mode").get<std::string>());
    const std::string mode = sim.at("mode").get<std::string>();
    if (mode == "strict") {
        bundle.sim_options.mode = SimMode::strict;
    } else if (mode == "diagnostic") {
        bundle.sim_options.mode = SimMode::diagnostic;
    } else {
        throw ScenarioError("sim.mode must be 'strict' or 'diagnostic'");
    }

    if (sim.contains("round_order")) {
        for (const auto& id : sim.at("round_order")) bundle.order.ids.push_back(id.get<int>());
    } else {
        for (const AgentSpec& a : sc.agents) bundle.order.ids.push_back(a.id);
        std::sort(bundle.order.ids.begin(), bundle.order.ids.end());
    }
    if (sim.contains("round_policy")) {
        const std::string policy = sim.at("round_policy").get<std::string>();
        if (policy == "fixed") {
            bundle.order.policy = RoundOrder::Policy::fixed;
        } else if (policy == "rotating") {
            bundle.order.policy = RoundOrder::Policy::rotating;
        } else {
            throw ScenarioError("sim.round_policy must be 'fixed' or 'rotating'");
        }
    }
    if (bundle.order.ids.size() != sc.agents.size()) {
        throw ScenarioError("sim.round_order must list every agent exactly once");
    }

    bundle.canonical = scenario_to_json(bundle);
    return bundle;
}

ScenarioBundle load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // byte offset -> line/column for the diagnostic
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ScenarioError(path.string() + ":" + std::to_string(line) + ":" +
                            std::to_string(col) + ": " + e.what());
    }
    try {
        return parse_scenario(doc);
    } catch (const ScenarioError& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

nlohmann::ordered_json scenario_to_json(const ScenarioBundle& bundle) {
    const Scenario& sc = bundle.scenario;
    ordered_json doc;
    doc["workspace"] = {{"center", vec_to_json(sc.workspace.center)},
                        {"radius", sc.workspace.radius}};
    doc["obstacles"] = ordered_json::array();
    for (const Ball& o : sc.obstacles) {
        doc["obstacles"].push_back(
            {{"center", vec_to_json(o.center)}, {"radius", o.radius}});
    }
    doc["agents"] = ordered_json::array();
    for (const AgentSpec& a : sc.agents) {
        ordered_json model = {{"type", a.model->name}, {"lipschitz", a.model->lipschitz}};
        if (a.model->name == "single_integrator") model["dim"] = a.model->state_dim;
        ordered_json agent = {{"id", a.id},
                              {"model", model},
                              {"radius", a.body_radius},
                              {"sensing_range", a.sensing_range},
                              {"neighbors", a.neighbors},
                              {"start", vec_to_json(a.start)},
                              {"goal", vec_to_json(a.goal)},
                              {"u_max", a.input_bound},
                              {"w_max", a.disturbance_bound}};
        doc["agents"].push_back(std::move(agent));
    }
    const FhocpConfig& cfg = bundle.configs.begin()->second;
    doc["controller"] = {{"Q", mat_to_json(cfg.Q)},
                         {"R", mat_to_json(cfg.R)},
                         {"P", mat_to_json(cfg.P)},
                         {"h", cfg.h},
                         {"T_p", cfg.horizon},
                         {"eps", sc.clearance},
                         {"eps_psi", cfg.eps_psi},
                         {"eps_omega", cfg.eps_omega},
                         {"K", mat_to_json(cfg.K)}};
    const SolverSettings& st = bundle.solver;
    doc["solver"] = {{"max_outer", st.max_outer},
                     {"penalty_initial", st.penalty_initial},
                     {"penalty_growth", st.penalty_growth},
                     {"penalty_cap", st.penalty_cap},
                     {"max_inner", st.max_inner},
                     {"step_initial", st.step_initial},
                     {"step_grow", st.step_grow},
                     {"step_shrink", st.step_shrink},
                     {"max_linesearch", st.max_linesearch},
                     {"armijo", st.armijo},
                     {"tol_stationarity", st.tol_stationarity},
                     {"tol_violation", st.tol_violation},
                     {"tol_terminal", st.tol_terminal},
                     {"fd_step", st.fd_step}};
    if (std::isfinite(st.tightening_cap)) {
        doc["solver"]["tightening_cap"] = st.tightening_cap;
    }
    const FhocpConfig& c0 = bundle.configs.begin()->second;
    doc["sim"] = {{"duration", bundle.sim_options.rounds * c0.h},
                  {"seed", bundle.sim_options.seed},
                  {"disturbance_mode", to_string(bundle.sim_options.disturbance_mode)},
                  {"mode", bundle.sim_options.mode == SimMode::strict ? "strict" : "diagnostic"},
                  {"round_order", bundle.order.ids},
                  {"round_policy",
                   bundle.order.policy == RoundOrder::Policy::fixed ? "fixed" : "rotating"}};
    return doc;
}

std::string config_hash(const ScenarioBundle& bundle) {
    const std::string dump = bundle.canonical.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char c : dump) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return std::string(buf);
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

double default_error_norm_bound(const DynamicsModel& model, const Ball& workspace) {
    double bound = 2.0 * workspace.radius;
    if (model.state_dim > model.position_dim) {
        // heading-like coordinates: allow a full revolution of error
        bound += 2.0 * M_PI * (model.state_dim - model.position_dim);
    }
    return bound;
}

std::map<int, CostConstants> ScenarioBundle::cost_constants() const {
    std::map<int, CostConstants> out;
    const std::map<int, double> bounds = error_norm_bounds();
    for (const AgentSpec& a : scenario.agents) {
        out.emplace(a.id, compute_cost_constants(configs.at(a.id), a.model->lipschitz,
                                                 bounds.at(a.id)));
    }
    return out;
}

std::map<int, double> ScenarioBundle::error_norm_bounds() const {
    std::map<int, double> out;
    for (const AgentSpec& a : scenario.agents) {
        out.emplace(a.id, default_error_norm_bound(*a.model, scenario.workspace));
    }
    return out;
}

}  // namespace swarm_nmpc
