#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "constable/config_file.hpp"
#include "constable/engine.hpp"
#include "constable/ideal.hpp"
#include "constable/inspector.hpp"
#include "constable/metrics.hpp"
#include "constable/pipeline.hpp"
#include "constable/scenarios.hpp"
#include "constable/trace.hpp"
#include "constable/verify.hpp"
#include "constable/workload.hpp"

using namespace constable;

namespace {

enum Exit { kOk = 0, kUsage = 1, kTraceError = 2, kGoldenMismatch = 3, kDeadlock = 4 };

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SettingArgs {
  std::string config;
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("--config", config, "flat key = value file (see `keys`)")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one key: --set section.key=value (repeatable)");
  }
  // File first, then --set, then dedicated flags applied by the caller.
  Settings load() const {
    Settings s;
    if (!config.empty()) apply_config_file(s, config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(0, "--set expects key=value, got '" + kv + "'");
      apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return s;
  }
};

std::string keys_help() {
  std::string out = "Configuration keys (defaults in parentheses where they follow the evaluated core):\n";
  for (const auto& k : config_keys()) out += "  " + k.name + "  " + k.help + "\n";
  return out;
}

IdealMode parse_mode(const std::string& m) {
  for (IdealMode x : {IdealMode::None, IdealMode::IdealConstable, IdealMode::IdealStableLVP, IdealMode::IdealStableLVP_DFE,
                      IdealMode::TwoXLoadWidth})
    if (m == ideal_mode_name(x)) return x;
  throw ConfigError(0, "unknown mode " + m);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for rename-time elimination of stable loads"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic or scenario trace");
  SettingArgs gen_args;
  gen_args.add(gen);
  std::uint64_t gen_seed = 0;
  std::uint64_t gen_n = 0;
  std::string gen_scenario, gen_out;
  gen->add_option("--seed", gen_seed, "generator seed (overrides gen.seed)");
  gen->add_option("-n,--instructions", gen_n, "instructions (overrides gen.n_instructions)");
  gen->add_option("--scenario", gen_scenario, "named hazard scenario instead of the synthetic generator")
      ->check(CLI::IsMember(scenario_names()));
  gen->add_option("-o,--output", gen_out, "output trace (default stdout)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "offline stable-load characterization");
  std::string insp_trace, insp_format = "json", insp_out;
  inspect->add_option("trace", insp_trace, "input trace")->required();
  inspect->add_option("--format", insp_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  inspect->add_option("-o,--output", insp_out, "report path (default stdout)");

  // sim
  auto* sim = app.add_subcommand("sim", "cycle-level simulation");
  SettingArgs sim_args;
  sim_args.add(sim);
  std::string sim_trace, sim_engine = "constable", sim_mode = "baseline", sim_index, sim_out, sim_format = "json",
                         sim_mirror;
  bool sim_golden = false, sim_amt_i = false;
  std::uint32_t sim_threshold = 0;
  sim->add_option("trace", sim_trace, "input trace")->required();
  sim->add_option("--engine", sim_engine, "none or constable")->check(CLI::IsMember({"none", "constable"}));
  sim->add_option("--mode", sim_mode, "baseline, ideal-constable, ideal-lvp, ideal-lvp-dfe or 2x-load")
      ->check(CLI::IsMember({"baseline", "ideal-constable", "ideal-lvp", "ideal-lvp-dfe", "2x-load"}));
  sim->add_flag("--golden-check", sim_golden, "abort on the first retired load that disagrees with functional replay");
  sim->add_flag("--amt-i", sim_amt_i, "AMT-I variant: L1-D evictions invalidate AMT entries, no CV pinning");
  sim->add_option("--amt-index", sim_index, "line or full")->check(CLI::IsMember({"line", "full"}));
  sim->add_option("--threshold", sim_threshold, "SLD confidence threshold (default 30)");
  sim->add_option("--mirror", sim_mirror, "second core's trace; its stores arrive as remote writes");
  sim->add_option("--format", sim_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sim->add_option("-o,--output", sim_out, "stats path (default stdout)");

  // compare
  auto* cmp = app.add_subcommand("compare", "delta between two stats files (b relative to a)");
  std::string cmp_a, cmp_b, cmp_out;
  cmp->add_option("stats_a", cmp_a, "reference stats.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("stats_b", cmp_b, "stats.json to compare")->required()->check(CLI::ExistingFile);
  cmp->add_option("-o,--output", cmp_out, "delta path (default stdout)");

  // verify
  auto* ver = app.add_subcommand("verify", "randomized golden-check suite");
  VerifyOptions vopt;
  bool ver_quiet = false;
  ver->add_option("--seeds", vopt.seeds, "number of random traces");
  ver->add_option("--instructions", vopt.instructions, "instructions per trace");
  ver->add_option("--first-seed", vopt.first_seed, "seed of the first trace");
  ver->add_flag("-q,--quiet", ver_quiet, "only print the summary");

  // keys
  auto* keys = app.add_subcommand("keys", "print every configuration key with its default value");

  // Set last so subcommands don't inherit it.
  app.footer(keys_help());
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      Settings s = gen_args.load();
      if (gen->count("--seed")) s.gen.seed = gen_seed;
      if (gen->count("--instructions")) s.gen.n_instructions = gen_n;
      const Trace t = gen_scenario.empty() ? generate(s.gen) : generate_scenario(gen_scenario, s.gen.seed);
      write_text(gen_out, format_trace(t));
    } else if (*inspect) {
      const Trace t = read_trace(insp_trace);
      write_text(insp_out, format_report(analyze(t), insp_format == "csv" ? ReportFormat::Csv : ReportFormat::Json));
    } else if (*sim) {
      Settings s = sim_args.load();
      if (sim_golden) s.core.golden_check = true;
      if (sim_amt_i) s.constable.amt_i_mode = true;
      if (!sim_index.empty()) apply_setting(s, "constable.amt_index", sim_index);
      if (sim->count("--threshold")) s.constable.threshold = sim_threshold;
      s.core.validate();
      s.constable.validate();
      const Trace t = read_trace(sim_trace);
      const IdealMode mode = parse_mode(sim_mode);
      SimStats st;
      if (mode != IdealMode::None) {
        if (sim_engine == "constable" && sim->count("--engine"))
          throw ConfigError(0, "ideal modes run without an engine; drop --engine constable");
        st = run_ideal(t, mode, analyze(t), s.core, s.caches);
      } else {
        Trace mirror;
        RunOptions opt;
        if (!sim_mirror.empty()) {
          mirror = read_trace(sim_mirror);
          opt.mirror = &mirror;
        }
        const auto pol = s.constable.amt_i_mode ? EvictionPolicy::AmtInvalidate : EvictionPolicy::PinCv;
        Memsys mem(s.caches, pol);
        if (sim_engine == "none") {
          NoopEngine e;
          st = run(t, s.core, e, mem, opt);
        } else {
          ConstableEngine e(s.constable);
          st = run(t, s.core, e, mem, opt);
        }
      }
      write_text(sim_out, sim_format == "csv" ? stats_to_csv(st) : stats_to_json(st).dump(2) + "\n");
    } else if (*cmp) {
      const SimStats a = stats_from_json(nlohmann::json::parse(read_text(cmp_a)));
      const SimStats b = stats_from_json(nlohmann::json::parse(read_text(cmp_b)));
      write_text(cmp_out, delta_to_json(compare_runs(a, b)).dump(2) + "\n");
    } else if (*ver) {
      VerifyReport r;
      for (std::uint64_t i = 0; i < vopt.seeds; ++i) {
        const std::size_t before = r.failures.size();
        run_verify_case(make_verify_case(vopt.first_seed + i, vopt.instructions), r);
        if (!ver_quiet && r.failures.size() > before)
          std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(vopt.first_seed + i),
                       r.failures.back().what.c_str());
      }
      std::printf("verify: %llu runs, %llu golden-checked loads, %llu eliminations, %llu flushes, %zu failures\n",
                  static_cast<unsigned long long>(r.runs), static_cast<unsigned long long>(r.checked_loads),
                  static_cast<unsigned long long>(r.eliminations), static_cast<unsigned long long>(r.flushes),
                  r.failures.size());
      if (!r.ok()) {
        for (const auto& f : r.failures)
          if (f.kind == VerifyFailureKind::GoldenMismatch) return kGoldenMismatch;
        for (const auto& f : r.failures)
          if (f.kind == VerifyFailureKind::Deadlock) return kDeadlock;
        return kUsage;
      }
    } else if (*keys) {
      std::cout << dump_settings(Settings{});
    }
  } catch (const TraceError& e) {
    std::fprintf(stderr, "trace error: %s\n", e.what());
    return kTraceError;
  } catch (const GoldenCheckMismatch& e) {
    std::fprintf(stderr, "golden check: %s\n", e.what());
    return kGoldenMismatch;
  } catch (const StructuralDeadlock& e) {
    std::fprintf(stderr, "deadlock guard: %s\n", e.what());
    return kDeadlock;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kOk;
}
