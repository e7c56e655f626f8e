// Command-line front end: validate | run | analyze | generate-frame.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tpsched/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Temporal-partition mixed-criticality scheduling simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario's major frames against C0-C2/K1/K2");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  std::string gen_path;
  auto* gen = app.add_subcommand("generate-frame", "Generate a valid major frame from the partition sets");
  gen->add_option("scenario", gen_path, "scenario file")->required();

  std::string run_path, trace_out, report_out;
  std::optional<std::int64_t> until;
  int threads = 1;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write the trace");
  run->add_option("scenario", run_path, "scenario file")->required();
  run->add_option("--until", until, "horizon in microseconds (default: scenario horizon)");
  run->add_option("--trace-out", trace_out, "trace file path (default: <name>.trace)");
  run->add_option("--report-out", report_out, "summary report path");
  run->add_option("--threads", threads, "worker threads for report aggregation")->check(CLI::PositiveNumber);

  std::string trace_path, analyze_scenario, gantt_format = "intervals", out_path;
  bool want_latency = false, want_jitter = false, want_cap = false, want_gantt = false;
  auto* analyze = app.add_subcommand("analyze", "Post-process a stored trace");
  analyze->add_option("trace", trace_path, "trace file")->required();
  analyze->add_flag("--latency", want_latency, "emergency-response latency records");
  analyze->add_flag("--jitter", want_jitter, "frame-switch jitter statistics");
  analyze->add_flag("--cap-audit", want_cap, "CPU-cap compliance audit (needs --scenario)");
  analyze->add_flag("--gantt", want_gantt, "schedule chart export");
  analyze->add_option("--scenario", analyze_scenario, "scenario file for the cap audit");
  analyze->add_option("--format", gantt_format, "gantt format: intervals|svg");
  analyze->add_option("--out", out_path, "write the result here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return tpsched::cli::cmd_validate(scenario_path, std::cout, std::cerr);
    if (*gen) return tpsched::cli::cmd_generate_frame(gen_path, std::cout, std::cerr);
    if (*run)
      return tpsched::cli::cmd_run(run_path, until, trace_out, report_out, threads, std::cout, std::cerr);
    if (*analyze) {
      int picked = static_cast<int>(want_latency) + static_cast<int>(want_jitter) +
                   static_cast<int>(want_cap) + static_cast<int>(want_gantt);
      if (picked != 1) {
        std::cerr << "error: pick exactly one of --latency --jitter --cap-audit --gantt\n";
        return tpsched::cli::kUsageError;
      }
      auto mode = want_latency  ? tpsched::cli::AnalyzeMode::Latency
                  : want_jitter ? tpsched::cli::AnalyzeMode::Jitter
                  : want_cap    ? tpsched::cli::AnalyzeMode::CapAudit
                                : tpsched::cli::AnalyzeMode::Gantt;
      return tpsched::cli::cmd_analyze(trace_path, mode, analyze_scenario, gantt_format, out_path,
                                       std::cout, std::cerr);
    }
  } catch (const tpsched::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tpsched::cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return tpsched::cli::kUsageError;
  }
  return tpsched::cli::kUsageError;
}
