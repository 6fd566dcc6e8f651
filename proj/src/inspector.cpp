#include "constable/inspector.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace constable {

const char* mode_name(AddressingMode m) {
  switch (m) {
  case AddressingMode::PcRel: return "pc_rel";
  case AddressingMode::StackRel: return "stack_rel";
  case AddressingMode::RegRel: return "reg_rel";
  }
  return "?";
}

AddressingMode addressing_mode(const SourceRegs& src) {
  if (src.empty()) throw InspectorError("load has an empty source register set");
  if (src.size() == 1 && src[0] == kRip) return AddressingMode::PcRel;
  bool stack_only = true;
  for (RegId r : src)
    if (r != kRsp && r != kRbp) stack_only = false;
  return stack_only ? AddressingMode::StackRel : AddressingMode::RegRel;
}

DistanceBin distance_bin(std::uint64_t distance) {
  if (distance < 50) return DistanceBin::Near;
  if (distance <= 250) return DistanceBin::Mid;
  return DistanceBin::Far;
}

std::unordered_set<std::uint64_t> InspectorReport::global_stable_pcs() const {
  std::unordered_set<std::uint64_t> out;
  for (const auto& [pc, p] : profiles)
    if (p.is_global_stable) out.insert(pc);
  return out;
}

namespace {

struct PcState {
  StaticLoadProfile profile;
  std::uint64_t last_index = 0;
  std::vector<std::uint32_t> distances;
};

} // namespace

InspectorReport analyze(const Trace& trace) {
  std::unordered_map<std::uint64_t, PcState> state;
  std::uint64_t index = 0;
  for (const auto& r : trace.records) {
    if (!r.is_instruction()) continue;
    const std::uint64_t here = index++;
    if (!r.is_load()) continue;
    auto [it, fresh] = state.try_emplace(r.pc);
    PcState& s = it->second;
    StaticLoadProfile& p = s.profile;
    if (fresh) {
      p.pc = r.pc;
      p.mode = addressing_mode(r.src);
      p.stable_paddr = r.mem_paddr;
      p.stable_value = r.mem_value;
    } else {
      const std::uint64_t d = here - s.last_index;
      ++p.distance_histogram[static_cast<std::size_t>(distance_bin(d))];
      s.distances.push_back(static_cast<std::uint32_t>(std::min<std::uint64_t>(d, UINT32_MAX)));
      if (r.mem_paddr != p.stable_paddr || r.mem_value != p.stable_value) p.is_global_stable = false;
    }
    s.last_index = here;
    ++p.dynamic_count;
  }

  InspectorReport report;
  InspectorAggregates& agg = report.aggregates;
  std::array<std::uint64_t, kNumModes> mode_dyn{};
  std::array<std::uint64_t, kNumBins> bin_total{};
  std::array<std::array<std::uint64_t, kNumBins>, kNumModes> mode_bin{};
  for (auto& [pc, s] : state) {
    StaticLoadProfile& p = s.profile;
    if (!s.distances.empty()) {
      auto mid = s.distances.begin() + static_cast<std::ptrdiff_t>((s.distances.size() - 1) / 2);
      std::nth_element(s.distances.begin(), mid, s.distances.end());
      p.median_distance = *mid;
    }
    agg.dynamic_loads += p.dynamic_count;
    if (p.is_global_stable) {
      const auto m = static_cast<std::size_t>(p.mode);
      agg.global_stable_dynamic_loads += p.dynamic_count;
      mode_dyn[m] += p.dynamic_count;
      for (std::size_t b = 0; b < kNumBins; ++b) {
        bin_total[b] += p.distance_histogram[b];
        mode_bin[m][b] += p.distance_histogram[b];
      }
    }
    report.profiles.emplace(pc, p);
  }
  auto frac = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  agg.global_stable_dynamic_fraction = frac(agg.global_stable_dynamic_loads, agg.dynamic_loads);
  std::uint64_t reocc = 0;
  for (auto b : bin_total) reocc += b;
  for (std::size_t m = 0; m < kNumModes; ++m) {
    agg.mode_breakdown[m] = frac(mode_dyn[m], agg.global_stable_dynamic_loads);
    std::uint64_t row = 0;
    for (auto b : mode_bin[m]) row += b;
    for (std::size_t b = 0; b < kNumBins; ++b) agg.per_mode_distance_breakdown[m][b] = frac(mode_bin[m][b], row);
  }
  for (std::size_t b = 0; b < kNumBins; ++b) agg.distance_breakdown[b] = frac(bin_total[b], reocc);
  return report;
}

std::string format_report(const InspectorReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out = "pc,dyn_count,stable,mode,dist_lt50,dist_50_250,dist_gt250,median_dist\n";
    char buf[200];
    for (const auto& [pc, p] : report.profiles) {
      std::snprintf(buf, sizeof buf, "0x%llx,%llu,%d,%s,%llu,%llu,%llu,%llu\n",
                    static_cast<unsigned long long>(pc), static_cast<unsigned long long>(p.dynamic_count),
                    p.is_global_stable ? 1 : 0, mode_name(p.mode),
                    static_cast<unsigned long long>(p.distance_histogram[0]),
                    static_cast<unsigned long long>(p.distance_histogram[1]),
                    static_cast<unsigned long long>(p.distance_histogram[2]),
                    static_cast<unsigned long long>(p.median_distance));
      out += buf;
    }
    return out;
  }
  nlohmann::ordered_json j;
  auto& profiles = j["profiles"] = nlohmann::ordered_json::array();
  for (const auto& [pc, p] : report.profiles) {
    nlohmann::ordered_json row;
    row["pc"] = "0x" + hex(pc);
    row["dyn_count"] = p.dynamic_count;
    row["stable"] = p.is_global_stable;
    row["mode"] = mode_name(p.mode);
    row["dist_lt50"] = p.distance_histogram[0];
    row["dist_50_250"] = p.distance_histogram[1];
    row["dist_gt250"] = p.distance_histogram[2];
    row["median_dist"] = p.median_distance;
    if (p.is_global_stable) {
      row["stable_paddr"] = "0x" + hex(p.stable_paddr);
      row["stable_value"] = "0x" + hex(p.stable_value);
    }
    profiles.push_back(std::move(row));
  }
  const auto& a = report.aggregates;
  auto& agg = j["aggregates"];
  agg["dynamic_loads"] = a.dynamic_loads;
  agg["global_stable_dynamic_loads"] = a.global_stable_dynamic_loads;
  agg["global_stable_dynamic_fraction"] = a.global_stable_dynamic_fraction;
  static const char* bins[] = {"lt50", "50_250", "gt250"};
  for (std::size_t m = 0; m < kNumModes; ++m)
    agg["mode_breakdown"][mode_name(static_cast<AddressingMode>(m))] = a.mode_breakdown[m];
  for (std::size_t b = 0; b < kNumBins; ++b) agg["distance_breakdown"][bins[b]] = a.distance_breakdown[b];
  for (std::size_t m = 0; m < kNumModes; ++m)
    for (std::size_t b = 0; b < kNumBins; ++b)
      agg["per_mode_distance_breakdown"][mode_name(static_cast<AddressingMode>(m))][bins[b]] =
          a.per_mode_distance_breakdown[m][b];
  return j.dump(2) + "\n";
}

void export_report(const InspectorReport& report, ReportFormat format, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << format_report(report, format);
  if (!f) throw std::runtime_error("write failed: " + path);
}

} // namespace constable
