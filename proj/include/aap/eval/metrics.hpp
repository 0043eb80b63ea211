#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aap/sim/drift.hpp"

namespace aap::eval {

// One evaluated episode; everything the drift-sweep metrics need.
struct EpisodeRecord {
  bool success = false;
  double path_length = 0.0;      // P_n
  double shortest_path = 0.0;    // L_n
  double start_distance = 0.0;   // d_start
  double final_distance = 0.0;   // d_termination
  int steps = 0;
  double total_reward = 0.0;
  int disabled_uses = 0;
  double drift_dm = 0.0;
  double drift_dr = 0.0;
  uint64_t seed = 0;

  void validate() const {
    if (path_length < 0.0 || shortest_path <= 0.0)
      throw std::invalid_argument("EpisodeRecord: invalid path lengths");
  }
};

// SPL: success weighted by best-possible path over the realized path.
inline double spl(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("spl: no records");
  double acc = 0.0;
  for (const auto& r : records) {
    r.validate();
    if (!r.success) continue;
    acc += r.shortest_path / std::max(r.path_length, r.shortest_path);
  }
  return acc / static_cast<double>(records.size());
}

// soft-SPL replaces the binary success with the progress toward the target;
// the progress factor is clamped to [0,1] so ending farther than the start
// counts as zero progress.
inline double soft_spl(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("soft_spl: no records");
  double acc = 0.0;
  for (const auto& r : records) {
    r.validate();
    if (r.start_distance <= 0.0) throw std::invalid_argument("soft_spl: start distance not positive");
    const double progress = std::clamp(1.0 - r.final_distance / r.start_distance, 0.0, 1.0);
    acc += progress * r.shortest_path / std::max(r.path_length, r.shortest_path);
  }
  return acc / static_cast<double>(records.size());
}

// ADR: fraction of episodes that used disabled actions at most once.
// DAU: mean number of disabled-action executions per episode.
inline std::pair<double, double> adr_dau(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("adr_dau: no records");
  double avoided = 0.0, usage = 0.0;
  for (const auto& r : records) {
    if (r.disabled_uses <= 1) avoided += 1.0;
    usage += r.disabled_uses;
  }
  const double n = static_cast<double>(records.size());
  return {avoided / n, usage / n};
}

inline double success_rate(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("success_rate: no records");
  double s = 0.0;
  for (const auto& r : records) s += r.success ? 1.0 : 0.0;
  return s / static_cast<double>(records.size());
}

// Per-cell aggregates of one evaluation run (one seed).
struct CellMetrics {
  double dm = 0.0, dr = 0.0;
  bool seen = false;
  int episodes = 0;
  double sr = 0.0, spl = 0.0, soft_spl = 0.0;
  double mean_length = 0.0, mean_reward = 0.0, mean_final_distance = 0.0;
  double adr = 0.0, dau = 0.0;
};

inline CellMetrics summarize_cell(const std::vector<EpisodeRecord>& records, double dm, double dr,
                                  bool seen) {
  if (records.empty()) throw std::invalid_argument("summarize_cell: empty cell");
  CellMetrics m;
  m.dm = dm;
  m.dr = dr;
  m.seen = seen;
  m.episodes = static_cast<int>(records.size());
  m.sr = success_rate(records);
  m.spl = spl(records);
  m.soft_spl = soft_spl(records);
  auto [adr, dau] = adr_dau(records);
  m.adr = adr;
  m.dau = dau;
  for (const auto& r : records) {
    m.mean_length += r.steps;
    m.mean_reward += r.total_reward;
    m.mean_final_distance += r.final_distance;
  }
  m.mean_length /= m.episodes;
  m.mean_reward /= m.episodes;
  m.mean_final_distance /= m.episodes;
  return m;
}

// Across-seed mean and standard deviation for every metric of every cell.
struct SummaryRow {
  double dm = 0.0, dr = 0.0;
  bool seen = false;
  int episodes = 0;
  // column order is fixed: sr, spl, soft_spl, length, reward, final_distance, adr, dau
  std::array<double, 8> mean{};
  std::array<double, 8> stddev{};
};

struct MetricsSummary {
  std::vector<SummaryRow> rows;
  int seed_count = 0;

  size_t entry_count() const { return rows.size() * 8; }

  static constexpr const char* kColumns[8] = {"sr",     "spl",    "softspl", "len",
                                              "reward", "dist",   "adr",     "dau"};
};

// per_seed: one vector of cell metrics per training seed; all must share the
// same drift grid.
inline MetricsSummary summarize(const std::vector<std::vector<CellMetrics>>& per_seed) {
  if (per_seed.empty() || per_seed[0].empty())
    throw std::invalid_argument("summarize: no cells (empty evaluation)");
  const size_t cells = per_seed[0].size();
  for (const auto& s : per_seed)
    if (s.size() != cells) throw std::invalid_argument("summarize: seed grids differ");

  MetricsSummary out;
  out.seed_count = static_cast<int>(per_seed.size());
  for (size_t c = 0; c < cells; ++c) {
    SummaryRow row;
    row.dm = per_seed[0][c].dm;
    row.dr = per_seed[0][c].dr;
    row.seen = per_seed[0][c].seen;
    row.episodes = per_seed[0][c].episodes;
    std::vector<std::array<double, 8>> vals;
    for (const auto& s : per_seed) {
      const CellMetrics& m = s[c];
      if (m.dm != row.dm || m.dr != row.dr)
        throw std::invalid_argument("summarize: drift grids do not match across seeds");
      vals.push_back({m.sr, m.spl, m.soft_spl, m.mean_length, m.mean_reward,
                      m.mean_final_distance, m.adr, m.dau});
    }
    for (int k = 0; k < 8; ++k) {
      double mean = 0.0;
      for (const auto& v : vals) mean += v[k];
      mean /= vals.size();
      double var = 0.0;
      for (const auto& v : vals) var += (v[k] - mean) * (v[k] - mean);
      var /= vals.size();
      row.mean[k] = mean;
      row.stddev[k] = std::sqrt(var);
    }
    out.rows.push_back(row);
  }
  return out;
}

// Tab-separated summary with a fixed column order.
inline std::string summary_to_tsv(const MetricsSummary& s) {
  std::ostringstream os;
  os << "drift_dm\tdrift_dr\tseen\tepisodes\tseeds";
  for (const char* c : MetricsSummary::kColumns) os << "\t" << c << "_mean\t" << c << "_std";
  os << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    os << buf;
  };
  for (const auto& r : s.rows) {
    num(r.dm);
    os << "\t";
    num(r.dr);
    os << "\t" << (r.seen ? 1 : 0) << "\t" << r.episodes << "\t" << s.seed_count;
    for (int k = 0; k < 8; ++k) {
      os << "\t";
      num(r.mean[k]);
      os << "\t";
      num(r.stddev[k]);
    }
    os << "\n";
  }
  return os.str();
}

inline MetricsSummary summary_from_tsv(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header) || header.rfind("drift_dm\tdrift_dr", 0) != 0)
    throw std::invalid_argument("summary_from_tsv: missing header");
  MetricsSummary out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SummaryRow r;
    int seen = 0, seeds = 0;
    ls >> r.dm >> r.dr >> seen >> r.episodes >> seeds;
    r.seen = seen != 0;
    out.seed_count = seeds;
    for (int k = 0; k < 8; ++k) ls >> r.mean[k] >> r.stddev[k];
    if (!ls) throw std::invalid_argument("summary_from_tsv: short row: " + line);
    out.rows.push_back(r);
  }
  if (out.rows.empty()) throw std::invalid_argument("summary_from_tsv: no rows");
  return out;
}

}  // namespace aap::eval
