// Command-line front end: control service, single runs, policy comparisons
// and the synthetic trace generator.

#include "harmonica/config.hpp"
#include "harmonica/error.hpp"
#include "harmonica/harness.hpp"
#include "harmonica/runner.hpp"
#include "harmonica/service.hpp"
#include "harmonica/trace.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace harmonica;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::not_found, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::runtime, "cannot write " + path);
    out << text;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sustainability-aware self-adaptation runtime for time-series inference"};
    app.require_subcommand(1);

    auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP control service");
    int port = 0;
    std::string data_dir = "harmonica-data";
    std::string host = "0.0.0.0";
    serve_cmd->add_option("--port", port, "Listen port (default: $HARMONICA_PORT or 8080)");
    serve_cmd->add_option("--data-dir", data_dir, "Dataset and log storage root");
    serve_cmd->add_option("--host", host, "Bind address");

    auto* run_cmd = app.add_subcommand("run", "Replay one run configuration");
    std::string config_path;
    std::string summary_out;
    std::string dataset_override;
    std::string telemetry_out;
    std::string events_out;
    std::string scenario;
    bool print_config = false;
    auto* config_opt = run_cmd->add_option("--config", config_path, "Run configuration (JSON)");
    run_cmd->add_option("--scenario", scenario,
                        "Default scenario on the built-in trace for this approach")
        ->excludes(config_opt);
    run_cmd->add_flag("--print-config", print_config, "Print the resolved configuration and exit");
    run_cmd->add_option("--out", summary_out, "Summary JSON output (default: stdout)");
    run_cmd->add_option("--dataset", dataset_override, "Dataset CSV (overrides dataset_path)");
    run_cmd->add_option("--telemetry-out", telemetry_out, "Write telemetry.csv here");
    run_cmd->add_option("--events-out", events_out, "Write adaptations.csv here");

    auto* compare_cmd = app.add_subcommand("compare", "Compare approaches over repeated runs");
    std::string policies = "static:lin,static:ridge2,static:mlp,switch,harmone";
    std::string dataset_path;
    int reps = 5;
    std::string table_out;
    std::uint64_t seed = 42;
    bool no_drift = false;
    compare_cmd->add_option("--policies", policies, "Comma-separated approach names");
    compare_cmd->add_option("--dataset", dataset_path, "Dataset CSV (default: built-in synthetic trace)");
    compare_cmd->add_option("--reps", reps, "Repetitions per approach")->check(CLI::PositiveNumber);
    compare_cmd->add_option("--out", table_out, "Comparison CSV output (default: stdout)");
    compare_cmd->add_option("--seed", seed, "Base seed; repetition i uses seed + i");
    compare_cmd->add_flag("--no-drift", no_drift, "Replay without the default drift chunks");

    auto* trace_cmd = app.add_subcommand("gen-trace", "Write a synthetic diurnal traffic trace");
    TraceParams trace = default_trace_params();
    std::string trace_out;
    trace_cmd->add_option("--days", trace.days, "Days of 5-minute readings")->check(CLI::PositiveNumber);
    trace_cmd->add_option("--seed", trace.seed, "Noise seed");
    trace_cmd->add_option("--out", trace_out, "Output CSV (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(data_dir, host, port);

        if (*run_cmd) {
            if (config_path.empty() && scenario.empty()) {
                throw Error(ErrorKind::validation, "run needs --config or --scenario");
            }
            RunConfig config;
            std::vector<TimePoint> dataset;
            if (!scenario.empty()) {
                dataset = dataset_override.empty() ? generate_trace(default_trace_params())
                                                   : load_dataset_csv(dataset_override);
                config = scenario_config(scenario, dataset.size());
            } else {
                config = run_config_from_json(parse_json(read_file(config_path)));
                const auto path = dataset_override.empty() ? config.dataset_path : dataset_override;
                if (path.empty()) throw Error(ErrorKind::validation, "no dataset given", "dataset_path");
                dataset = load_dataset_csv(path);
            }
            if (!config.policy) config.policy = builtin_policy("harmone", static_cast<int>(config.mape.window));
            if (!config.goals) {
                config.goals = config.policy->kind == PolicyKind::rules
                                   ? harmone_default_goals()
                                   : std::vector<SustainabilityGoal>{};
            }
            if (print_config) {
                write_output(summary_out, to_json(config).dump(2) + "\n");
                return 0;
            }
            const auto result = run_with_logs(dataset, config);
            if (!telemetry_out.empty()) write_output(telemetry_out, telemetry_csv(result.telemetry));
            if (!events_out.empty()) write_output(events_out, adaptations_csv(result.events));
            write_output(summary_out, to_json(result.summary).dump(2) + "\n");
            return 0;
        }

        if (*compare_cmd) {
            const auto dataset =
                dataset_path.empty() ? generate_trace(default_trace_params()) : load_dataset_csv(dataset_path);
            auto base = scenario_config("static:lin", dataset.size(), seed);
            base.policy.reset();
            base.goals.reset();
            if (no_drift) base.drift_specs.clear();
            const auto rows = compare(split_list(policies), dataset, base, reps,
                                      [](const std::string& name, int rep) {
                                          std::cerr << "running " << name << " rep " << rep + 1 << "\n";
                                      });
            write_output(table_out, comparison_csv(rows));
            return 0;
        }

        if (*trace_cmd) {
            write_output(trace_out, dataset_csv(generate_trace(trace)));
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "harmonica: " << to_string(e.kind()) << ": " << e.what();
        if (!e.field().empty()) std::cerr << " (field " << e.field() << ")";
        std::cerr << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "harmonica: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
