#include <doctest.h>

#include "aap/eval/harness.hpp"
#include "aap/sim/particle.hpp"

using namespace aap;
using namespace aap::eval;

namespace {

EpisodeRecord rec(bool success, double P, double L, double d0, double d1, int disabled = 0) {
  EpisodeRecord r;
  r.success = success;
  r.path_length = P;
  r.shortest_path = L;
  r.start_distance = d0;
  r.final_distance = d1;
  r.steps = 10;
  return r.disabled_uses = disabled, r;
}

}  // namespace

TEST_SUITE_BEGIN("evalharness");

TEST_CASE("spl hand-computed cases") {
  // single success along the shortest path
  CHECK(spl({rec(true, 2.0, 2.0, 2.0, 0.0)}) == doctest::Approx(1.0));
  // S=1, L=2, P=4 -> 0.5
  CHECK(spl({rec(true, 4.0, 2.0, 2.0, 0.0)}) == doctest::Approx(0.5));
  // failures contribute zero regardless of path
  CHECK(spl({rec(false, 0.5, 2.0, 2.0, 1.0)}) == doctest::Approx(0.0));
  // a shorter-than-optimal recorded path cannot push the ratio above 1
  CHECK(spl({rec(true, 1.0, 2.0, 2.0, 0.0)}) == doctest::Approx(1.0));
  CHECK_THROWS(spl({}));
}

TEST_CASE("soft-spl hand-computed cases") {
  // terminated exactly at the target with P = L
  CHECK(soft_spl({rec(true, 2.0, 2.0, 2.0, 0.0)}) == doctest::Approx(1.0));
  // no movement at all
  CHECK(soft_spl({rec(false, 0.0, 2.0, 2.0, 2.0)}) == doctest::Approx(0.0));
  // halfway progress with P = 2L -> 0.25
  CHECK(soft_spl({rec(false, 4.0, 2.0, 2.0, 1.0)}) == doctest::Approx(0.25));
  // ending farther than the start clamps to zero progress
  CHECK(soft_spl({rec(false, 1.0, 2.0, 2.0, 3.0)}) == doctest::Approx(0.0));
  // successful termination at the target equals plain SPL
  auto r = rec(true, 3.0, 2.0, 2.0, 0.0);
  CHECK(soft_spl({r}) == doctest::Approx(spl({r})));
}

TEST_CASE("adr/dau hand-computed cases") {
  // episode A uses disabled actions 3x, episode B 0x
  auto [adr1, dau1] = adr_dau({rec(true, 1, 1, 1, 0, 3), rec(true, 1, 1, 1, 0, 0)});
  CHECK(adr1 == doctest::Approx(0.5));
  CHECK(dau1 == doctest::Approx(1.5));
  // no disabled actions configured
  auto [adr2, dau2] = adr_dau({rec(true, 1, 1, 1, 0, 0), rec(false, 1, 1, 1, 1, 0)});
  CHECK(adr2 == doctest::Approx(1.0));
  CHECK(dau2 == doctest::Approx(0.0));
  // exactly one use per episode still counts as avoiding ("more than once")
  auto [adr3, dau3] = adr_dau({rec(true, 1, 1, 1, 0, 1), rec(true, 1, 1, 1, 0, 1)});
  CHECK(adr3 == doctest::Approx(1.0));
  CHECK(dau3 == doctest::Approx(1.0));
}

TEST_CASE("per-episode spl contribution never exceeds success") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const bool succ = rng.uniform() < 0.5;
    const double L = rng.uniform(0.1, 3.0);
    const double P = rng.uniform(0.0, 5.0);
    std::vector<EpisodeRecord> one = {rec(succ, P, L, L, succ ? 0.0 : rng.uniform(0, 3))};
    CHECK(spl(one) <= success_rate(one) + 1e-12);
    CHECK(spl(one) >= 0.0);
    CHECK(soft_spl(one) <= 1.0 + 1e-12);
  }
}

TEST_CASE("summarize: aggregates with mean and std across seeds") {
  std::vector<EpisodeRecord> cell_a = {rec(true, 2, 2, 2, 0), rec(false, 1, 2, 2, 1.5)};
  std::vector<EpisodeRecord> cell_b = {rec(true, 2, 2, 2, 0), rec(true, 3, 2, 2, 0)};
  auto m1 = summarize_cell(cell_a, 0.0, 90.0, false);
  auto m2 = summarize_cell(cell_b, 0.0, 90.0, false);
  CHECK(m1.sr == doctest::Approx(0.5));
  CHECK(m2.sr == doctest::Approx(1.0));

  MetricsSummary s = summarize({{m1}, {m2}});
  CHECK(s.rows.size() == 1);
  CHECK(s.entry_count() == 8);  // grid cells x metrics
  CHECK(s.rows[0].mean[0] == doctest::Approx(0.75));
  CHECK(s.rows[0].stddev[0] == doctest::Approx(0.25));
  CHECK(s.seed_count == 2);

  // all-success cell
  auto m3 = summarize_cell(cell_b, 0.0, 90.0, false);
  CHECK(m3.sr == doctest::Approx(1.0));

  // empty cell is an error, not a silent zero
  CHECK_THROWS(summarize_cell({}, 0, 0, false));
  CHECK_THROWS(summarize({}));
  // mismatched grids across seeds
  auto m4 = summarize_cell(cell_b, 0.1, 0.0, true);
  CHECK_THROWS(summarize({{m1}, {m4}}));
}

TEST_CASE("summary tsv round-trip") {
  auto m1 = summarize_cell({rec(true, 2, 2, 2, 0)}, 0.0, 120.0, false);
  auto m2 = summarize_cell({rec(false, 2, 2, 2, 1)}, 0.0, 180.0, false);
  MetricsSummary s = summarize({{m1, m2}, {m1, m2}});
  const std::string tsv = summary_to_tsv(s);
  MetricsSummary back = summary_from_tsv(tsv);
  CHECK(back.rows.size() == s.rows.size());
  CHECK(summary_to_tsv(back) == tsv);
}

TEST_CASE("run_cell: deterministic greedy evaluation on the particle task") {
  sim::ParticleConfig pc;
  pc.max_steps = 32;
  policy::NetDims d;
  d.state_repr = 8;
  d.goal_embed = 4;
  d.change_proj = 8;
  d.memory = 8;
  d.belief = 8;
  d.tf_layers = 1;
  d.tf_heads = 2;
  d.fwd_hidden = 8;
  policy::Policy pol(policy::Variant::aap, sim::ParticleEnv(pc).info(), d, 4);

  EvalOptions opt;
  opt.episodes_per_cell = 6;
  opt.seed = 777;
  opt.factory = [&pc] { return std::make_unique<sim::ParticleEnv>(pc); };

  sim::DriftCell cell{0.0, 150.0, false};
  auto r1 = run_cell(pol, cell, opt);
  auto r2 = run_cell(pol, cell, opt);
  REQUIRE(r1.size() == 6);
  for (size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].total_reward == r2[i].total_reward);
    CHECK(r1[i].steps == r2[i].steps);
    CHECK(r1[i].final_distance == r2[i].final_distance);
    CHECK(r1[i].drift_dr == 150.0);
    CHECK(r1[i].shortest_path > 0.0);
  }

  auto [metrics, recs] = run_grid(pol, {cell, {0.0, 180.0, false}}, opt);
  CHECK(metrics.size() == 2);
  CHECK(recs.size() == 12);
  CHECK(spl(recs) <= success_rate(recs) + 1e-12);  // aggregate SPL <= SR
}

TEST_SUITE_END();
