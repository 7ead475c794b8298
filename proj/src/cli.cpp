#include "swarm_nmpc/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace swarm_nmpc {

namespace {

using nlohmann::ordered_json;

void print_check(std::ostream& out, const std::string& label, const ConfigCheck& check) {
    out << label << (check.ok ? "PASS" : "FAIL") << "\n";
    for (const Violation& v : check.violations) {
        out << "    " << to_string(v.kind) << ": agent " << v.agent;
        if (v.other >= 0) out << " / " << v.other;
        out << "  measured=" << format_number(v.measured)
            << " threshold=" << format_number(v.threshold) << "\n";
    }
}

ordered_json metrics_to_json(const Metrics& m) {
    const auto id_map = [](const std::map<int, double>& values) {
        ordered_json out = ordered_json::object();
        for (const auto& [id, v] : values) out[std::to_string(id)] = v;
        return out;
    };
    return ordered_json{{"min_inter_agent_distance", m.min_inter_agent_distance},
                        {"max_neighbor_distance", m.max_neighbor_distance},
                        {"min_obstacle_distance", m.min_obstacle_distance},
                        {"max_boundary_excursion", m.max_boundary_excursion},
                        {"final_error_norms", id_map(m.final_error_norms)},
                        {"ultimate_bound_lambda_min", id_map(m.ultimate_bound_lambda_min)},
                        {"ultimate_bound_lambda_max", id_map(m.ultimate_bound_lambda_max)},
                        {"iss_violation_count", m.iss_violation_count},
                        {"total_agent_rounds", m.total_agent_rounds},
                        {"feasible_agent_rounds", m.feasible_agent_rounds}};
}

ordered_json theorem_checks_to_json(const ScenarioBundle& bundle) {
    ordered_json checks = ordered_json::object();
    const std::map<int, CostConstants> constants = bundle.cost_constants();

    ordered_json disturbance = ordered_json::object();
    ordered_json terminal = ordered_json::object();
    for (const AgentSpec& a : bundle.scenario.agents) {
        const FhocpConfig& cfg = bundle.configs.at(a.id);
        const CostConstants& c = constants.at(a.id);
        const DisturbanceBoundReport rep =
            check_disturbance_bound(cfg, a.model->lipschitz, a.disturbance_bound, c);
        disturbance[std::to_string(a.id)] = {{"rhs", rep.rhs},
                                             {"w_max", a.disturbance_bound},
                                             {"satisfied", rep.satisfied},
                                             {"L_F", c.lipschitz_running},
                                             {"L_V", c.lipschitz_terminal},
                                             {"rho", c.rho},
                                             {"xi", c.xi}};

        ErrorDynamics ed(a.model, a.goal);
        const TerminalRegionReport tr = verify_terminal_region(cfg, ed, a.input_bound, 64);
        terminal[std::to_string(a.id)] = {
            {"input_admissible", tr.input_admissible},
            {"worst_input_margin", tr.worst_input_margin},
            {"decrease_holds", tr.decrease_holds},
            {"worst_decrease_value", tr.worst_decrease_value},
            {"reaches_omega", tr.reaches_omega},
            {"worst_reach_value", tr.worst_reach_value},
            {"omega_invariant", tr.omega_invariant},
            {"worst_invariance_value", tr.worst_invariance_value}};
    }
    checks["disturbance_bound"] = std::move(disturbance);
    checks["terminal_region"] = std::move(terminal);
    return checks;
}

void write_trace_csv(const ScenarioBundle& bundle, const SimTrace& trace,
                     const std::filesystem::path& path) {
    const AgentSpec& a0 = bundle.scenario.agents.front();
    const int n = a0.model->state_dim;
    const int m = a0.model->input_dim;

    std::ofstream out(path);
    out << "t,agent_id";
    for (int i = 0; i < n; ++i) out << ",x" << i;
    for (int i = 0; i < m; ++i) out << ",u" << i;
    out << ",error_norm,J_star,min_margin_interagent,min_margin_neighbor,"
           "min_margin_obstacle,margin_boundary,feasible\n";
    for (const TraceRow& row : trace.rows) {
        out << format_number(row.t) << ',' << row.agent_id;
        for (int i = 0; i < n; ++i) out << ',' << format_number(row.state[i]);
        for (int i = 0; i < m; ++i) out << ',' << format_number(row.input[i]);
        out << ',' << format_number(row.error_norm) << ',' << format_number(row.j_star)
            << ',' << format_number(row.margin_inter_agent) << ','
            << format_number(row.margin_connectivity) << ','
            << format_number(row.margin_obstacle) << ','
            << format_number(row.margin_boundary) << ',' << (row.feasible ? 1 : 0) << '\n';
    }
}

void write_plotdata(const ScenarioBundle& bundle, const SimTrace& trace,
                    const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const Scenario& sc = bundle.scenario;
    const int n_agents = static_cast<int>(sc.agents.size());
    const int pos_dim = sc.position_dim();

    std::ofstream traj(dir / "trajectories.csv");
    std::ofstream errors(dir / "error_norms.csv");
    std::ofstream neighbor(dir / "neighbor_distances.csv");
    std::ofstream obstacle(dir / "obstacle_distances.csv");
    std::ofstream inputs(dir / "input_norms.csv");

    traj << "t";
    errors << "t";
    inputs << "t";
    for (const AgentSpec& a : sc.agents) {
        for (int d = 0; d < pos_dim; ++d) traj << ",a" << a.id << "_p" << d;
        errors << ",a" << a.id;
        inputs << ",a" << a.id;
    }
    traj << '\n';
    errors << '\n';
    inputs << '\n';

    std::vector<std::pair<int, int>> edges;  // connectivity pairs, deduplicated
    for (const AgentSpec& a : sc.agents) {
        for (int j : a.neighbors) {
            const int lo = std::min(a.id, j), hi = std::max(a.id, j);
            if (std::find(edges.begin(), edges.end(), std::make_pair(lo, hi)) == edges.end()) {
                edges.emplace_back(lo, hi);
            }
        }
    }
    neighbor << "t";
    for (const auto& [i, j] : edges) neighbor << ",d_" << i << "_" << j;
    neighbor << '\n';

    obstacle << "t";
    for (const AgentSpec& a : sc.agents) {
        for (std::size_t l = 0; l < sc.obstacles.size(); ++l) {
            obstacle << ",a" << a.id << "_o" << l + 1;
        }
    }
    obstacle << '\n';

    for (std::size_t r = 0; r < trace.rows.size(); r += n_agents) {
        const double t = trace.rows[r].t;
        traj << format_number(t);
        errors << format_number(t);
        inputs << format_number(t);
        neighbor << format_number(t);
        obstacle << format_number(t);
        std::vector<Vec> positions(n_agents);
        for (int i = 0; i < n_agents; ++i) {
            const TraceRow& row = trace.rows[r + i];
            positions[i] = row.state.head(pos_dim);
            for (int d = 0; d < pos_dim; ++d) traj << ',' << format_number(positions[i][d]);
            errors << ',' << format_number(row.error_norm);
            inputs << ',' << format_number(row.input.norm());
        }
        for (const auto& [i, j] : edges) {
            const double dist =
                (positions[sc.index_of(i)] - positions[sc.index_of(j)]).norm();
            neighbor << ',' << format_number(dist);
        }
        for (int i = 0; i < n_agents; ++i) {
            for (const Ball& o : sc.obstacles) {
                obstacle << ',' << format_number((positions[i] - o.center).norm());
            }
        }
        traj << '\n';
        errors << '\n';
        inputs << '\n';
        neighbor << '\n';
        obstacle << '\n';
    }
}

ordered_json summary_json(const ScenarioBundle& bundle, const RunArtifacts& artifacts) {
    const SimTrace& trace = artifacts.trace;
    const bool completed = trace.rounds_executed == trace.rounds_requested &&
                           !trace.halted_strict && !trace.diverged;
    std::string reason = "ok";
    if (trace.diverged) reason = "diverged";
    if (trace.halted_strict) reason = "strict_violation";
    if (artifacts.exit_code == kExitInitialConfig) reason = "infeasible_initial_configuration";

    ordered_json doc;
    doc["version"] = kVersion;
    doc["config_hash"] = config_hash(bundle);
    doc["completed"] = completed;
    doc["partial"] = !completed;
    doc["exit_reason"] = reason;
    doc["rounds_requested"] = trace.rounds_requested;
    doc["rounds_executed"] = trace.rounds_executed;
    doc["violation_observed"] = trace.violation;
    doc["metrics"] = metrics_to_json(artifacts.metrics);
    ordered_json checks = theorem_checks_to_json(bundle);
    checks["gronwall"] = {{"samples", artifacts.gronwall.samples},
                          {"violations", artifacts.gronwall.violations},
                          {"max_ratio", artifacts.gronwall.max_ratio}};
    checks["iss"] = {{"checked", artifacts.iss.checked},
                     {"violations", artifacts.iss.violations},
                     {"worst_slack", artifacts.iss.worst_slack}};
    doc["checks"] = std::move(checks);
    return doc;
}

void note_disturbance_interpretation(const ScenarioBundle& bundle, bool quiet,
                                     std::ostream& err) {
    if (quiet) return;
    const DisturbanceMode mode = bundle.sim_options.disturbance_mode;
    if (mode == DisturbanceMode::sinusoidal) {
        err << "note: sinusoidal disturbance is replicated per coordinate and rescaled so "
               "||w|| <= w_max (select sinusoidal_per_coordinate for the raw variant)\n";
    } else if (mode == DisturbanceMode::sinusoidal_per_coordinate) {
        err << "note: per-coordinate sinusoidal disturbance reaches ||w|| = sqrt(n) * w_max; "
               "the Gronwall envelope premise does not cover it\n";
    }
}

}  // namespace

RunArtifacts execute_run(const ScenarioBundle& bundle, const RunOptions& options,
                         std::ostream& err) {
    ScenarioBundle local = bundle;
    if (options.seed_override) local.sim_options.seed = *options.seed_override;
    if (options.mode_override) local.sim_options.mode = *options.mode_override;
    note_disturbance_interpretation(local, options.quiet, err);

    RunArtifacts artifacts;
    artifacts.trace = run_closed_loop(local.scenario, local.configs, local.order,
                                      local.solver, local.sim_options);
    artifacts.iss = iss_decrease_check(artifacts.trace, local.scenario,
                                       local.cost_constants(), local.solver.tol_violation);
    artifacts.gronwall = gronwall_audit(artifacts.trace, local.scenario);
    artifacts.metrics =
        compute_metrics(artifacts.trace, local.scenario, local.configs, artifacts.iss);
    if (artifacts.trace.halted_strict) {
        artifacts.exit_code = kExitStrictViolation;
    } else if (artifacts.trace.diverged) {
        artifacts.exit_code = 1;
    }
    return artifacts;
}

void write_outputs(const ScenarioBundle& bundle, const RunArtifacts& artifacts,
                   const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);
    write_trace_csv(bundle, artifacts.trace, output_dir / "trace.csv");
    std::ofstream summary(output_dir / "summary.json");
    summary << summary_json(bundle, artifacts).dump(2) << '\n';
    write_plotdata(bundle, artifacts.trace, output_dir / "plotdata");
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    ScenarioBundle bundle;
    try {
        bundle = load_scenario_file(options.scenario_path);
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParseError;
    }

    RunArtifacts artifacts;
    try {
        artifacts = execute_run(bundle, options, err);
    } catch (const InitialConfigError& e) {
        err << "error: " << e.what() << "\n";
        artifacts.exit_code = kExitInitialConfig;
        artifacts.trace.rounds_requested = bundle.sim_options.rounds;
        write_outputs(bundle, artifacts, options.output_dir);
        return kExitInitialConfig;
    }
    write_outputs(bundle, artifacts, options.output_dir);

    if (!options.quiet) {
        out << "rounds executed: " << artifacts.trace.rounds_executed << "/"
            << artifacts.trace.rounds_requested << "\n"
            << "min inter-agent distance: "
            << format_number(artifacts.metrics.min_inter_agent_distance) << "\n"
            << "max neighbor distance:    "
            << format_number(artifacts.metrics.max_neighbor_distance) << "\n"
            << "min obstacle distance:    "
            << format_number(artifacts.metrics.min_obstacle_distance) << "\n"
            << "max boundary excursion:   "
            << format_number(artifacts.metrics.max_boundary_excursion) << "\n"
            << "feasible agent-rounds:    " << artifacts.metrics.feasible_agent_rounds << "/"
            << artifacts.metrics.total_agent_rounds << "\n";
        for (const auto& [id, e] : artifacts.metrics.final_error_norms) {
            out << "final error, agent " << id << ": " << format_number(e) << "\n";
        }
    }
    return artifacts.exit_code;
}

int cmd_check(const CheckOptions& options, std::ostream& out, std::ostream& err) {
    ScenarioBundle bundle;
    try {
        bundle = load_scenario_file(options.scenario_path);
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParseError;
    }
    const Scenario& sc = bundle.scenario;

    out << "scenario: " << options.scenario_path.string() << "\n";
    out << "config_hash: " << config_hash(bundle) << "\n";
    out << "structural validation (sensing ranges, neighbor sets): PASS\n";

    std::vector<Vec> start_positions;
    for (const AgentSpec& a : sc.agents) start_positions.push_back(a.start_position());
    print_check(out, "initial configuration collision-free: ",
                check_collision_free_configuration(sc, start_positions));
    print_check(out, "goal configuration feasible: ", check_feasible_goal(sc));

    for (const AgentSpec& a : sc.agents) {
        Vec region_center = Vec::Zero(a.model->state_dim);
        region_center.head(sc.position_dim()) = sc.workspace.center;
        double region_radius = sc.workspace.radius;
        if (a.model->state_dim > sc.position_dim()) region_radius += M_PI;
        const double sampled = estimate_lipschitz(
            *a.model, Ball(region_center, region_radius), a.input_bound, 4000);
        out << "agent " << a.id << " lipschitz: configured "
            << format_number(a.model->lipschitz) << ", sampled lower bound "
            << format_number(sampled)
            << (sampled > a.model->lipschitz ? "  [exceeds configured]" : "") << "\n";
    }

    const std::map<int, CostConstants> constants = bundle.cost_constants();
    for (const AgentSpec& a : sc.agents) {
        const FhocpConfig& cfg = bundle.configs.at(a.id);
        const CostConstants& c = constants.at(a.id);
        const DisturbanceBoundReport rep =
            check_disturbance_bound(cfg, a.model->lipschitz, a.disturbance_bound, c);
        out << "agent " << a.id << " disturbance-bound condition: rhs="
            << format_number(rep.rhs) << " w_max=" << format_number(a.disturbance_bound)
            << " satisfied=" << (rep.satisfied ? "yes" : "no")
            << "  (L_F=" << format_number(c.lipschitz_running)
            << " L_V=" << format_number(c.lipschitz_terminal)
            << " rho=" << format_number(c.rho) << " xi=" << format_number(c.xi) << ")\n";
    }

    for (const AgentSpec& a : sc.agents) {
        ErrorDynamics ed(a.model, a.goal);
        const TerminalRegionReport tr =
            verify_terminal_region(bundle.configs.at(a.id), ed, a.input_bound, 128);
        out << "agent " << a.id << " terminal region:"
            << " input_admissible=" << (tr.input_admissible ? "yes" : "no")
            << " (margin " << format_number(tr.worst_input_margin) << ")"
            << " decrease=" << (tr.decrease_holds ? "yes" : "no")
            << " (worst " << format_number(tr.worst_decrease_value) << ")"
            << " reaches_omega=" << (tr.reaches_omega ? "yes" : "no")
            << " (worst " << format_number(tr.worst_reach_value) << ")"
            << " invariant=" << (tr.omega_invariant ? "yes" : "no")
            << " (worst " << format_number(tr.worst_invariance_value) << ")\n";
    }
    return kExitOk;
}

namespace {

ordered_json apply_parameter(ordered_json doc, const std::string& parameter, double value) {
    const auto dot = parameter.find('.');
    if (dot == std::string::npos) {
        throw ScenarioError("sweep parameter must be 'section.field', got '" + parameter + "'");
    }
    const std::string section = parameter.substr(0, dot);
    const std::string field = parameter.substr(dot + 1);
    if (section == "agents") {
        for (auto& agent : doc.at("agents")) {
            if (!agent.contains(field)) {
                throw ScenarioError("sweep: agents have no field '" + field + "'");
            }
            agent[field] = value;
        }
        return doc;
    }
    if (!doc.contains(section) || !doc.at(section).is_object()) {
        throw ScenarioError("sweep: unknown section '" + section + "'");
    }
    if (!doc.at(section).contains(field)) {
        throw ScenarioError("sweep: section '" + section + "' has no field '" + field + "'");
    }
    if (section == "sim" && field == "seed") {
        doc[section][field] = static_cast<std::uint64_t>(value);
    } else {
        doc[section][field] = value;
    }
    return doc;
}

int sweep_thread_cap() {
    if (const char* env = std::getenv("SWARM_NMPC_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err) {
    if (options.values.empty()) {
        err << "error: sweep requires a nonempty value grid\n";
        return kExitParseError;
    }
    ScenarioBundle base;
    try {
        base = load_scenario_file(options.scenario_path);
        // reject bad parameter paths before spawning workers
        apply_parameter(base.canonical, options.parameter, options.values.front());
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParseError;
    }

    const int n_points = static_cast<int>(options.values.size());
    std::vector<int> exit_codes(n_points, 0);
    std::vector<Metrics> metrics(n_points);
    std::vector<std::string> failures(n_points);

    std::atomic<int> cursor{0};
    const int n_threads = std::max(1, std::min(sweep_thread_cap(), n_points));
    const auto worker = [&]() {
        for (int idx = cursor.fetch_add(1); idx < n_points; idx = cursor.fetch_add(1)) {
            const std::filesystem::path dir =
                options.output_dir / ("point_" + std::to_string(idx));
            try {
                ScenarioBundle bundle =
                    parse_scenario(apply_parameter(base.canonical, options.parameter,
                                                   options.values[idx]));
                RunOptions run_options;
                run_options.seed_override = options.seed_override;
                run_options.mode_override = options.mode_override;
                run_options.quiet = true;
                std::ostringstream sink;
                RunArtifacts artifacts = execute_run(bundle, run_options, sink);
                write_outputs(bundle, artifacts, dir);
                exit_codes[idx] = artifacts.exit_code;
                metrics[idx] = artifacts.metrics;
            } catch (const ScenarioError& e) {
                exit_codes[idx] = kExitParseError;
                failures[idx] = e.what();
            } catch (const InitialConfigError& e) {
                exit_codes[idx] = kExitInitialConfig;
                failures[idx] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    std::filesystem::create_directories(options.output_dir);
    std::ofstream aggregate(options.output_dir / "aggregate.csv");
    aggregate << options.parameter
              << ",exit_code,feasible_fraction,min_inter_agent_distance,"
                 "max_neighbor_distance,min_obstacle_distance,max_boundary_excursion,"
                 "max_final_error\n";
    int worst = 0;
    for (int idx = 0; idx < n_points; ++idx) {
        const Metrics& m = metrics[idx];
        double max_final_error = 0.0;
        for (const auto& [id, e] : m.final_error_norms) max_final_error = std::max(max_final_error, e);
        const double fraction =
            m.total_agent_rounds == 0
                ? 0.0
                : static_cast<double>(m.feasible_agent_rounds) / m.total_agent_rounds;
        aggregate << format_number(options.values[idx]) << ',' << exit_codes[idx] << ','
                  << format_number(fraction) << ','
                  << format_number(m.min_inter_agent_distance) << ','
                  << format_number(m.max_neighbor_distance) << ','
                  << format_number(m.min_obstacle_distance) << ','
                  << format_number(m.max_boundary_excursion) << ','
                  << format_number(max_final_error) << '\n';
        worst = std::max(worst, exit_codes[idx]);
        if (!failures[idx].empty() && !options.quiet) {
            err << "point " << idx << ": " << failures[idx] << "\n";
        }
    }
    if (!options.quiet) {
        out << "sweep complete: " << n_points << " points, worst exit code " << worst << "\n";
    }
    return worst;
}

}  // namespace swarm_nmpc
