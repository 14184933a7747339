// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.
//
// Command-line front end: run scenarios, replay traces for determinism
// checks, list the catalog, print protocol constants.
//
// Exit codes: 0 clean/defended, 3 double spend succeeded, 4 unresolvable
// fork, 2 usage or configuration errors, 1 internal failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dca/scenarios.hpp"

namespace {

dca::ScenarioConfig load_config(const std::string& spec) {
    namespace fs = std::filesystem;
    dca::ScenarioConfig cfg;
    if (fs::exists(spec)) {
        std::ifstream in(spec);
        dca::Json j = dca::Json::parse(in);
        cfg = j.get<dca::ScenarioConfig>();
    } else {
        cfg = dca::scenario_config(spec); // catalog name
    }
    // environment override wins, for CI seed sweeps
    if (const char* env = std::getenv("DCA_SIM_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
    return cfg;
}

int run_command(const std::string& spec, const std::string& out_path, const std::string& trace_path,
                const std::string& dump_cb_dir, const std::string& dump_record_dir) {
    dca::ScenarioConfig cfg = load_config(spec);
    cfg.validate();

    std::ostringstream trace;
    std::ostream* trace_sink = trace_path.empty() ? nullptr : &trace;

    dca::RunReport rep;
    if (cfg.adversary.scenario == "history_rewrite") {
        rep = dca::run_scenario(cfg, trace_sink);
    } else {
        dca::Simulation sim(cfg, trace_sink);
        rep = sim.run();
        if (!dump_cb_dir.empty()) {
            std::filesystem::create_directories(dump_cb_dir);
            sim.dump_cbs(dump_cb_dir);
        }
        if (!dump_record_dir.empty()) {
            std::filesystem::create_directories(dump_record_dir);
            sim.dump_records(dump_record_dir);
        }
    }

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        out << trace.str();
    }
    dca::Json report_json = rep.to_json();
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        out << report_json.dump(2) << "\n";
    }

    std::cout << "scenario " << rep.scenario << " seed " << rep.seed << ": verdict "
              << dca::to_string(rep.verdict) << "\n";
    if (!rep.txs.empty()) {
        std::int64_t cmin = INT64_MAX, cmax = INT64_MIN, smin = INT64_MAX, smax = INT64_MIN;
        for (const auto& m : rep.txs) {
            cmin = std::min(cmin, m.confirm_latency_s);
            cmax = std::max(cmax, m.confirm_latency_s);
            smin = std::min(smin, m.secure_latency_s);
            smax = std::max(smax, m.secure_latency_s);
        }
        std::cout << rep.txs.size() << " transactions, confirm " << cmin << ".." << cmax
                  << " s, secure " << smin << ".." << smax << " s\n";
    }
    if (!rep.slashes.empty()) std::cout << rep.slashes.size() << " slash entries\n";
    return dca::exit_code_for(rep.verdict);
}

int replay_command(const std::string& trace_path) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open trace: " << trace_path << "\n";
        return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    std::string original = buf.str();

    std::istringstream first_line(original);
    std::string line;
    if (!std::getline(first_line, line)) {
        std::cerr << "empty trace\n";
        return 2;
    }
    dca::Json head = dca::Json::parse(line);
    if (!head.contains("config")) {
        std::cerr << "trace does not start with a config line\n";
        return 2;
    }
    dca::ScenarioConfig cfg = head.at("config").get<dca::ScenarioConfig>();

    std::ostringstream replayed;
    dca::run_scenario(cfg, &replayed);
    if (replayed.str() == original) {
        std::cout << "replay ok: " << original.size() << " bytes reproduced\n";
        return 0;
    }
    std::cerr << "replay mismatch\n";
    return 1;
}

void print_params(const dca::CycleParams& p) {
    std::cout << "cycle_length_s=" << p.cycle_length_s << "\n"
              << "slot_duration_s=" << p.slot_duration_s << "\n"
              << "slices=" << p.slices << "\n"
              << "confirm_depth=" << p.confirm_depth << "\n"
              << "cycle_lag_slots=" << p.cycle_lag_slots << "\n"
              << "prep_period_slots=" << p.prep_period_slots << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decrits consensus simulator"};
    app.require_subcommand(1);

    std::string spec, out_path, trace_path, dump_cb_dir, dump_record_dir, cfg_name;
    bool full_scale = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario from a config file or catalog name");
    run->add_option("config", spec, "config file path or scenario name")->required();
    run->add_option("--out", out_path, "write the report as JSON");
    run->add_option("--trace", trace_path, "write the event trace (NDJSON)");
    run->add_option("--dump-cbs", dump_cb_dir, "write cb_<index>.bin snapshots plus JSON sidecars");
    run->add_option("--dump-records", dump_record_dir, "write record_<slot>_<hash>.bin files");

    CLI::App* list = app.add_subcommand("list-scenarios", "list the scenario catalog");

    CLI::App* replay = app.add_subcommand("replay", "re-run a trace and verify byte identity");
    replay->add_option("trace", trace_path, "trace file produced by run --trace")->required();

    CLI::App* params = app.add_subcommand("params", "print protocol constants");
    params->add_flag("--full-scale", full_scale, "the full-scale deployment constants");

    CLI::App* show = app.add_subcommand("show-config", "print a catalog scenario's config JSON");
    show->add_option("name", cfg_name, "scenario name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return run_command(spec, out_path, trace_path, dump_cb_dir, dump_record_dir);
        if (list->parsed()) {
            for (const auto& name : dca::scenario_names()) std::cout << name << "\n";
            return 0;
        }
        if (replay->parsed()) return replay_command(trace_path);
        if (params->parsed()) {
            print_params(full_scale ? dca::CycleParams::full_scale() : dca::CycleParams::desk_scale());
            return 0;
        }
        if (show->parsed()) {
            dca::Json j;
            dca::to_json(j, dca::scenario_config(cfg_name));
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
