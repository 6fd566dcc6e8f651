#include "constable/config_file.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace constable {

ConfigError::ConfigError(std::size_t line_no, const std::string& what)
    : std::invalid_argument(line_no ? "line " + std::to_string(line_no) + ": " + what : what), line_no_(line_no) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  int base = 10;
  std::string_view sv = v;
  if (sv.size() > 2 && sv[0] == '0' && (sv[1] == 'x' || sv[1] == 'X')) {
    base = 16;
    sv.remove_prefix(2);
  }
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out, base);
  if (ec != std::errc{} || p != sv.data() + sv.size()) throw ConfigError(0, "not an unsigned integer: '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(0, "not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(0, "not a boolean: '" + v + "'");
}

std::array<double, 3> parse_triple(const std::string& v) {
  std::array<double, 3> out{};
  std::stringstream ss(v);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) throw ConfigError(0, "expected three comma-separated weights: '" + v + "'");
    out[i++] = parse_double(trim(part));
  }
  if (i != 3) throw ConfigError(0, "expected three comma-separated weights: '" + v + "'");
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  // Shortest form that reads back exactly.
  for (int prec = 15; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, d);
    if (std::strtod(buf, nullptr) == d) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

template <class T, class F>
ConfigKey u_key(std::string name, std::string help, F field) {
  return {std::move(name), std::move(help),
          [field](Settings& s, const std::string& v) { field(s) = static_cast<T>(parse_u64(v)); },
          [field](const Settings& s) { return std::to_string(field(const_cast<Settings&>(s))); }};
}

template <class F>
ConfigKey d_key(std::string name, std::string help, F field) {
  return {std::move(name), std::move(help), [field](Settings& s, const std::string& v) { field(s) = parse_double(v); },
          [field](const Settings& s) { return fmt_double(field(const_cast<Settings&>(s))); }};
}

template <class F>
ConfigKey b_key(std::string name, std::string help, F field) {
  return {std::move(name), std::move(help), [field](Settings& s, const std::string& v) { field(s) = parse_bool(v); },
          [field](const Settings& s) { return std::string(field(const_cast<Settings&>(s)) ? "true" : "false"); }};
}

template <class F>
ConfigKey t_key(std::string name, std::string help, F field) {
  return {std::move(name), std::move(help), [field](Settings& s, const std::string& v) { field(s) = parse_triple(v); },
          [field](const Settings& s) {
            const auto& a = field(const_cast<Settings&>(s));
            return fmt_double(a[0]) + "," + fmt_double(a[1]) + "," + fmt_double(a[2]);
          }};
}

#define FIELD(expr) [](Settings & s) -> auto& { return s.expr; }

std::vector<ConfigKey> build_keys() {
  using u32 = std::uint32_t;
  using u64 = std::uint64_t;
  std::vector<ConfigKey> k;
  // Workload generator.
  k.push_back(u_key<u64>("gen.n_instructions", "dynamic instructions to emit", FIELD(gen.n_instructions)));
  k.push_back(u_key<u64>("gen.seed", "generator seed", FIELD(gen.seed)));
  k.push_back(d_key("gen.stable_load_fraction", "share of dynamic loads from global-stable PCs", FIELD(gen.stable_load_fraction)));
  k.push_back(t_key("gen.addressing_mode_mix", "pc_rel,stack_rel,reg_rel weights", FIELD(gen.addressing_mode_mix)));
  k.push_back(t_key("gen.inter_occurrence_profile", "<50,50-250,>250 instruction distance weights",
                    FIELD(gen.inter_occurrence_profile)));
  k.push_back(d_key("gen.store_interference_rate", "share of stores hitting monitored lines", FIELD(gen.store_interference_rate)));
  k.push_back(d_key("gen.silent_store_rate", "share of stores writing the value already present", FIELD(gen.silent_store_rate)));
  k.push_back(d_key("gen.snoop_rate", "remote-write records per instruction", FIELD(gen.snoop_rate)));
  k.push_back(d_key("gen.register_overwrite_rate", "share of ALU ops overwriting a load base register",
                    FIELD(gen.register_overwrite_rate)));
  k.push_back(d_key("gen.ordering_violation_rate", "per phase-load chance of a late-resolving aliasing store",
                    FIELD(gen.ordering_violation_rate)));
  k.push_back(d_key("gen.context_switch_rate", "context-switch records per instruction", FIELD(gen.context_switch_rate)));
  k.push_back(d_key("gen.load_fraction", "share of instructions that are loads", FIELD(gen.load_fraction)));
  k.push_back(d_key("gen.store_fraction", "share of instructions that are stores", FIELD(gen.store_fraction)));
  k.push_back(d_key("gen.branch_fraction", "share of instructions that are branches", FIELD(gen.branch_fraction)));
  k.push_back(d_key("gen.phase_load_fraction", "share of non-stable loads that are stable for a phase",
                    FIELD(gen.phase_load_fraction)));
  k.push_back(d_key("gen.far_load_fraction", "share of non-stable loads that miss to memory", FIELD(gen.far_load_fraction)));
  k.push_back(d_key("gen.mean_stable_lifetime", "mean instances per global-stable PC", FIELD(gen.mean_stable_lifetime)));
  k.push_back(d_key("gen.mean_phase_length", "mean instances between phase changes", FIELD(gen.mean_phase_length)));
  // Core (defaults follow the evaluated Golden Cove-like configuration).
  k.push_back(u_key<u32>("core.rename_width", "uops renamed per cycle (6)", FIELD(core.rename_width)));
  k.push_back(u_key<u32>("core.retire_width", "uops retired per cycle (6)", FIELD(core.retire_width)));
  k.push_back(u_key<u32>("core.rob_size", "reorder buffer entries (512)", FIELD(core.rob_size)));
  k.push_back(u_key<u32>("core.lb_size", "load buffer entries (240)", FIELD(core.lb_size)));
  k.push_back(u_key<u32>("core.sb_size", "store buffer entries (112)", FIELD(core.sb_size)));
  k.push_back(u_key<u32>("core.rs_size", "reservation station entries (248)", FIELD(core.rs_size)));
  k.push_back(u_key<u32>("core.alu_ports", "ALU ports (5)", FIELD(core.alu_ports)));
  k.push_back(u_key<u32>("core.agu_ports", "load AGUs (3)", FIELD(core.agu_ports)));
  k.push_back(u_key<u32>("core.load_ports", "load ports (3)", FIELD(core.load_ports)));
  k.push_back(u_key<u32>("core.sta_ports", "store-address ports (2)", FIELD(core.sta_ports)));
  k.push_back(u_key<u32>("core.std_ports", "store-data ports (2)", FIELD(core.std_ports)));
  k.push_back(u_key<u32>("core.store_address_delay", "extra cycles before a store address resolves",
                         FIELD(core.store_address_delay)));
  k.push_back(u_key<u32>("core.load_width_multiplier", "multiplies AGUs and load ports", FIELD(core.load_width_multiplier)));
  k.push_back(b_key("core.golden_check", "abort on a retired load differing from functional replay", FIELD(core.golden_check)));
  k.push_back(u_key<u64>("core.deadlock_cycles", "cycles without retirement before aborting", FIELD(core.deadlock_cycles)));
  // Caches.
  k.push_back(u_key<u64>("cache.l1d_size", "L1-D bytes (48 KB)", FIELD(caches.l1d.size_bytes)));
  k.push_back(u_key<u32>("cache.l1d_ways", "L1-D ways (12)", FIELD(caches.l1d.ways)));
  k.push_back(u_key<u32>("cache.l1d_latency", "L1-D load-to-use cycles (5)", FIELD(caches.l1d.latency)));
  k.push_back(u_key<u64>("cache.l2_size", "L2 bytes (2 MB)", FIELD(caches.l2.size_bytes)));
  k.push_back(u_key<u32>("cache.l2_ways", "L2 ways (16)", FIELD(caches.l2.ways)));
  k.push_back(u_key<u32>("cache.l2_latency", "L2 load-to-use cycles (12)", FIELD(caches.l2.latency)));
  k.push_back(u_key<u32>("cache.memory_latency", "memory load-to-use cycles (200)", FIELD(caches.memory_latency)));
  // Elimination structures.
  k.push_back(u_key<u32>("constable.sld_sets", "SLD sets (32)", FIELD(constable.sld_sets)));
  k.push_back(u_key<u32>("constable.sld_ways", "SLD ways (16)", FIELD(constable.sld_ways)));
  k.push_back(u_key<u32>("constable.confidence_bits", "SLD confidence counter width (5)", FIELD(constable.confidence_bits)));
  k.push_back(u_key<u32>("constable.threshold", "confidence needed to mark a load likely-stable (30)", FIELD(constable.threshold)));
  k.push_back(u_key<u32>("constable.rmt_stack_capacity", "RMT PCs per RSP/RBP entry (16)", FIELD(constable.rmt_stack_capacity)));
  k.push_back(u_key<u32>("constable.rmt_other_capacity", "RMT PCs per other GPR entry (8)", FIELD(constable.rmt_other_capacity)));
  k.push_back(u_key<u32>("constable.amt_sets", "AMT sets (32)", FIELD(constable.amt_sets)));
  k.push_back(u_key<u32>("constable.amt_ways", "AMT ways (8)", FIELD(constable.amt_ways)));
  k.push_back(u_key<u32>("constable.amt_pcs_per_entry", "PCs per AMT entry (4)", FIELD(constable.amt_pcs_per_entry)));
  k.push_back(u_key<u32>("constable.xprf_size", "xPRF registers (32)", FIELD(constable.xprf_size)));
  k.push_back(u_key<u32>("constable.sld_read_ports", "SLD lookups per rename cycle (3)", FIELD(constable.sld_read_ports)));
  k.push_back(u_key<u32>("constable.sld_write_ports", "SLD flag resets per rename cycle (2)", FIELD(constable.sld_write_ports)));
  k.push_back({"constable.amt_index", "line or full: AMT match granularity (line)",
               [](Settings& s, const std::string& v) {
                 if (v == "line") s.constable.amt_index = AmtIndex::Cacheline;
                 else if (v == "full") s.constable.amt_index = AmtIndex::FullAddress;
                 else throw ConfigError(0, "amt_index must be line or full: '" + v + "'");
               },
               [](const Settings& s) {
                 return std::string(s.constable.amt_index == AmtIndex::Cacheline ? "line" : "full");
               }});
  k.push_back(b_key("constable.amt_i", "invalidate AMT entries on L1-D eviction instead of pinning CV bits",
                    FIELD(constable.amt_i_mode)));
  k.push_back(b_key("constable.context_switch_clears_confidence", "also zero SLD confidence on a context switch",
                    FIELD(constable.context_switch_clears_confidence)));
  k.push_back(b_key("constable.fault_disable_store_invalidation",
                    "fault injection for testing the golden check: stores never invalidate AMT entries",
                    FIELD(constable.disable_store_invalidation)));
  return k;
}

#undef FIELD

} // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(s, value);
      return;
    }
  }
  throw ConfigError(0, "unknown key '" + key + "'");
}

void apply_config_text(Settings& s, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(no, "expected key = value");
    try {
      apply_setting(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(no, e.what());
    }
  }
}

void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(s, ss.str());
}

std::string dump_settings(const Settings& s) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(s) + "\n";
  return out;
}

} // namespace constable
