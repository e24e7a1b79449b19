/*
 * Copyright (c) 2026, the tree2pc authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end. Four subcommands cover the artifact's workflows:
//
//   run     execute one scenario (bundled name or file) and report outcomes
//   check   exhaustively explore the abstract protocol configurations
//   bench   cost sweeps over tree shape and participant granularity (CSV)
//   replay  re-judge a recorded abstract trace against the transition rules
//
// Exit codes are part of the contract so CI can tell failure classes apart:
//   0  success
//   2  parse error (scenario text, trace file, flag values)
//   3  validation error (dangling references, unsupported combinations)
//   4  invariant violation (safety property, failed conformance, residual)
//   5  liveness failure (no quiescence, exploration budget exhausted)
//   6  golden mismatch (expectation block: hash, outcomes, counters)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tree2pc/cost_metrics.hpp"
#include "tree2pc/model_checker.hpp"
#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitInvariant = 4;
constexpr int kExitLiveness = 5;
constexpr int kExitGolden = 6;

using tree2pc::Scenario;

// Resolves --scenario: a bundled name first, then a path.
std::optional<Scenario> find_scenario(const std::string& ref,
                                      std::string* error) {
  for (const auto& sc : tree2pc::bundled_scenarios()) {
    if (sc.name == ref) return sc;
  }
  if (!std::filesystem::exists(ref)) {
    *error = "unknown scenario '" + ref +
             "': not a bundled name and no such file";
    return std::nullopt;
  }
  return Scenario::load_file(ref);  // throws ParseError upward
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& body) {
  std::ofstream out(path);
  out << body;
  if (!out) {
    std::cerr << "warning: could not write " << path.string() << "\n";
  }
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

int cmd_run(const std::string& scenario_ref,
            std::optional<std::uint64_t> seed,
            std::optional<std::string> variant,
            std::optional<std::string> mode,
            std::optional<std::uint64_t> budget,
            const std::string& out_dir, bool list_only, bool quiet) {
  if (list_only) {
    for (const auto& sc : tree2pc::bundled_scenarios()) {
      std::printf("%-24s mode=%s variant=%s\n", sc.name.c_str(),
                  tree2pc::to_string(sc.config.mode),
                  sc.config.variant.format().c_str());
    }
    return kExitOk;
  }

  std::string error;
  auto found = find_scenario(scenario_ref, &error);
  if (!found) {
    std::cerr << "error: " << error << "\n";
    return kExitValidation;
  }
  Scenario sc = std::move(*found);

  if (seed) sc.config.seed = *seed;
  if (budget) sc.config.max_events = *budget;
  if (variant) sc.config.variant = tree2pc::ProtocolVariant::parse(*variant);
  if (mode) {
    if (*mode == "logged") {
      sc.config.mode = tree2pc::SimMode::Logged;
    } else if (*mode == "abstract") {
      sc.config.mode = tree2pc::SimMode::Abstract;
    } else {
      std::cerr << "error: --mode must be 'logged' or 'abstract'\n";
      return kExitParse;
    }
  }
  // Overrides can invalidate a pinned golden hash; drop it when they differ
  // from the scenario's own settings so exploratory runs aren't flagged.
  if ((seed || variant || mode || budget) && sc.expect.trace_hash) {
    sc.expect.trace_hash.reset();
  }

  tree2pc::Simulator sim(sc);  // throws ValidationError upward
  tree2pc::RunResult result = sim.run_to_quiescence();
  tree2pc::CostSummary cost = tree2pc::summarize(sc, result);

  if (!quiet) {
    std::cout << result.summary();
  }

  if (!out_dir.empty()) {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream trace;
    for (const auto& line : result.trace) trace << line << '\n';
    write_text_file(dir / (sc.name + ".trace"), trace.str());
    write_text_file(dir / (sc.name + ".summary.txt"), result.summary());
    write_text_file(dir / (sc.name + ".metrics.csv"),
                    tree2pc::cost_csv_header() + "\n" +
                        tree2pc::cost_csv_row(sc, cost) + "\n");
    if (result.abstract_trace) {
      write_text_file(dir / (sc.name + ".abstract.trace"),
                      result.abstract_trace->to_text());
    }
    if (!quiet) {
      std::cout << "artifacts written to " << dir.string() << "\n";
    }
  }

  bool budget_expected = false;
  for (const auto& kind : sc.expect.violations) {
    if (kind == tree2pc::violation::kQuiescenceBudget) budget_expected = true;
  }
  if (!result.quiesced && !budget_expected) return kExitLiveness;
  bool golden_mismatch = false;
  bool invariant_unmet = false;
  for (const auto& u : result.unmet_expectations) {
    if (starts_with(u, "trace hash mismatch") || starts_with(u, "counter ") ||
        starts_with(u, "expected outcome")) {
      golden_mismatch = true;
    } else {
      invariant_unmet = true;  // unexpected/missing violation kinds
    }
  }
  if (invariant_unmet) return kExitInvariant;
  if (golden_mismatch) return kExitGolden;
  return result.ok ? kExitOk : kExitInvariant;
}

int cmd_check(const std::string& config_filter, std::size_t budget,
              const std::string& mutate, const std::string& out_dir,
              bool quiet) {
  tree2pc::Mutation mutation = tree2pc::Mutation::None;
  if (mutate == "commit-on-no") {
    mutation = tree2pc::Mutation::CommitOnNo;
  } else if (!mutate.empty()) {
    std::cerr << "error: unknown mutation '" << mutate << "'\n";
    return kExitParse;
  }

  int exit_code = kExitOk;
  std::size_t ran = 0;
  for (const auto& named : tree2pc::bundled_model_configs()) {
    if (!config_filter.empty() &&
        named.name.find(config_filter) == std::string::npos) {
      continue;
    }
    ++ran;
    tree2pc::ModelConfig config = named.config;
    config.mutation = mutation;
    tree2pc::ExplorationBudget eb;
    eb.max_states = budget;
    tree2pc::CheckResult r = tree2pc::check_model(config, eb);
    if (!quiet) std::cout << r.to_report(named.name);

    if (!r.complete && exit_code == kExitOk) exit_code = kExitLiveness;
    for (std::size_t i = 0; i < r.violations.size(); ++i) {
      const auto& v = r.violations[i];
      bool liveness = v.property == tree2pc::property::kLiveness ||
                      v.property == tree2pc::property::kTerminalAgreement;
      int code = liveness ? kExitLiveness : kExitInvariant;
      // Invariant beats liveness when both appear.
      if (exit_code == kExitOk || code < exit_code) exit_code = code;
      if (!out_dir.empty()) {
        std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        write_text_file(dir / (named.name + ".cex" + std::to_string(i) +
                               ".txt"),
                        v.to_text());
      }
    }
  }
  if (ran == 0) {
    std::cerr << "error: no configuration matches '" << config_filter
              << "'\n";
    return kExitValidation;
  }
  return exit_code;
}

int cmd_bench(std::vector<int> heights, std::vector<int> fanouts,
              std::vector<int> partition_counts, bool release,
              const std::string& out_dir, bool quiet) {
  std::ostringstream csv;
  csv << tree2pc::cost_csv_header() << '\n';

  auto uniform = tree2pc::sweep_uniform(heights, fanouts, release);
  for (const auto& p : uniform) csv << p.csv_row << '\n';
  for (const auto& p : tree2pc::sweep_granularity(partition_counts)) {
    csv << p.csv_row << '\n';
  }

  if (!quiet) std::cout << csv.str();
  if (!out_dir.empty()) {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "bench.csv", csv.str());
  }

  // The sweeps double as a self-check: jitter-free uniform runs must match
  // the closed forms exactly, and width must not move the latency figure.
  for (const auto& p : uniform) {
    const auto& r = p.summary.residuals;
    if (!r.valid) {
      std::cerr << "bench: " << p.label << " produced no valid residuals\n";
      return kExitInvariant;
    }
    if (r.response_roundtrips != 0.0 || r.response_log_syncs != 0.0 ||
        r.lock_release_roundtrips != 0.0 || r.lock_release_log_syncs != 0.0 ||
        r.msgs_total != 0.0 || r.participant_sync_logs != 0.0) {
      std::cerr << "bench: " << p.label << " deviates from the closed form\n";
      return kExitInvariant;
    }
  }
  for (const auto& a : uniform) {
    for (const auto& b : uniform) {
      if (a.height == b.height &&
          a.summary.counters.response_latency !=
              b.summary.counters.response_latency) {
        std::cerr << "bench: latency varies with width at height "
                  << a.height << "\n";
        return kExitInvariant;
      }
      if (a.height < b.height && a.fanout == b.fanout &&
          a.summary.counters.response_latency >=
              b.summary.counters.response_latency) {
        std::cerr << "bench: latency not increasing in depth\n";
        return kExitInvariant;
      }
    }
  }
  return kExitOk;
}

int cmd_replay(const std::string& trace_path, bool quiet) {
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "error: cannot open trace file '" << trace_path << "'\n";
    return kExitValidation;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  tree2pc::AbstractTrace trace =
      tree2pc::AbstractTrace::from_text(buf.str());  // throws ParseError
  tree2pc::ReplayResult r = tree2pc::conformance_replay(trace);
  if (!quiet) {
    std::cout << (r.ok ? "conforms" : "DIVERGES") << ": " << r.message
              << "\n";
    if (!r.ok) std::cout << "failed at step " << r.failed_step << "\n";
  }
  return r.ok ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree-structured two-phase commit simulator and checker"};
  app.require_subcommand(1);
  app.fallthrough();  // parent flags may follow the subcommand
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress normal output");

  // run
  auto* run = app.add_subcommand("run", "execute one scenario");
  std::string scenario_ref;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> run_budget;
  std::string run_out;
  bool list_only = false;
  run->add_option("--scenario", scenario_ref,
                  "bundled scenario name or scenario file path");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--variant", variant,
                  "override the protocol variant (comma-separated switches)");
  run->add_option("--mode", mode, "override the mode: logged | abstract");
  run->add_option("--budget", run_budget, "override the event budget");
  run->add_option("--out-dir", run_out, "write trace/summary/metrics files");
  run->add_flag("--list", list_only, "list bundled scenarios and exit");

  // check
  auto* check = app.add_subcommand(
      "check", "exhaustively check the abstract protocol configurations");
  std::string config_filter;
  std::size_t check_budget = 1'000'000;
  std::string mutate;
  std::string check_out;
  check->add_option("--config", config_filter,
                    "only configurations whose name contains this");
  check->add_option("--budget", check_budget,
                    "maximum states to explore per configuration");
  check->add_option("--mutate", mutate,
                    "run with a seeded defect (commit-on-no)");
  check->add_option("--out-dir", check_out, "write counterexample files");

  // bench
  auto* bench = app.add_subcommand("bench", "cost sweeps, CSV output");
  std::vector<int> heights{1, 2, 3};
  std::vector<int> fanouts{1, 2, 4, 8};
  std::vector<int> partition_counts{100};
  bool no_release = false;
  std::string bench_out;
  bench->add_option("--heights", heights, "tree heights to sweep")
      ->delimiter(',');
  bench->add_option("--fanouts", fanouts, "fanouts to sweep")
      ->delimiter(',');
  bench->add_option("--partitions", partition_counts,
                    "partition counts for the granularity sweep")
      ->delimiter(',');
  bench->add_flag("--no-release", no_release,
                  "measure the variant without commit-point RELEASE");
  bench->add_option("--out-dir", bench_out, "also write bench.csv");

  // replay
  auto* replay = app.add_subcommand(
      "replay", "conformance-replay a recorded abstract trace");
  std::string trace_path;
  replay->add_option("--trace", trace_path, "trace file (from run --out-dir)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (scenario_ref.empty() && !list_only) {
        std::cerr << "error: run needs --scenario or --list\n";
        return kExitParse;
      }
      return cmd_run(scenario_ref, seed, variant, mode, run_budget, run_out,
                     list_only, quiet);
    }
    if (check->parsed()) {
      return cmd_check(config_filter, check_budget, mutate, check_out, quiet);
    }
    if (bench->parsed()) {
      return cmd_bench(heights, fanouts, partition_counts, !no_release,
                       bench_out, quiet);
    }
    if (replay->parsed()) {
      return cmd_replay(trace_path, quiet);
    }
  } catch (const tree2pc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const tree2pc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
