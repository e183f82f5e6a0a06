// smmon: run, validate and re-check social-media collection scenarios.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "smmon/harness.hpp"
#include "smmon/scenario.hpp"

namespace {

std::string default_out_dir(const smmon::Scenario& s)
{
    if (const char* env = std::getenv("SMMON_OUT_DIR"); env && *env)
        return env;
    return "runs/" + s.name;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::string out)
{
    auto scenario = smmon::load_scenario(path);
    if (seed)
        scenario.seed = *seed;
    if (out.empty())
        out = default_out_dir(scenario);
    const auto report = smmon::run_scenario(scenario, out);
    smmon::write_report_text(report, std::cout);
    std::printf("\nwall_time_seconds      %.3f\noutput                 %s\n", report.wall_time_seconds,
                out.c_str());
    return report.generated == report.archived + report.loss.total() ? 0 : 3;
}

int cmd_validate(const std::string& path)
{
    const auto s = smmon::load_scenario(path);
    std::cout << "ok " << s.name << ": duration " << smmon::format_duration(s.duration) << ", demand "
              << smmon::to_string(s.demand.kind) << ", " << s.faults.size() << " fault window(s)\n";
    return 0;
}

int cmd_report(const std::string& dir)
{
    const auto check = smmon::check_run_dir(dir);
    std::ifstream text(std::filesystem::path(dir) / "report.txt");
    std::cout << text.rdbuf();
    std::cout << "\nre-check from files\n"
              << "  generated            " << check.generated << '\n'
              << "  archived on disk     " << check.archived_on_disk << '\n'
              << "  duplicate keys       " << check.duplicate_keys_on_disk << '\n'
              << "  total loss           " << check.loss.total() << '\n'
              << "  conservation         " << (check.conserved ? "holds" : "VIOLATED") << '\n';
    return check.conserved ? 0 : 3;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulated social-media collection pipeline"};
    app.require_subcommand(1);

    std::string scenario_path, run_dir, out_dir;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Run a scenario and write its report directory");
    run->add_option("scenario", scenario_path, "Scenario YAML file")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--out", out_dir, "Output directory (default: $SMMON_OUT_DIR or runs/<name>)");

    auto* val = app.add_subcommand("validate", "Check a scenario file without running it");
    val->add_option("scenario", scenario_path, "Scenario YAML file")->required();

    auto* rep = app.add_subcommand("report", "Print a run's report and re-verify conservation");
    rep->add_option("run_dir", run_dir, "Directory written by 'run'")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario_path, seed, out_dir);
        if (val->parsed())
            return cmd_validate(scenario_path);
        return cmd_report(run_dir);
    } catch (const smmon::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
