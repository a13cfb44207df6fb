#include "doctest.h"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "cachesub/coalition.hpp"
#include "cachesub/demand.hpp"
#include "cachesub/lagrangian.hpp"
#include "cachesub/net_model.hpp"
#include "support/toy_oracle.hpp"
#include "support/toy_scenarios.hpp"

using namespace cachesub;

namespace {

// Three-node chain: origin - CO(0) - mid(1) - leaf(2), one ANO. The CO and
// mid stores are metered; the leaf store holds exactly one content and the
// leaf uplink carries at most 5 Mb/s. Transit costs 2 per Mb/s. One CP with
// two contents at 4 and 3 Mb/s gives single-digit hand-checkable numbers.
TreeNetwork chain_net() {
  TreeNetwork net;
  net.parent = {kOrigin, 0, 1};
  net.ano = {kNoAno, 0, 0};
  net.file_size_gb = 1.0;
  net.storage_price = {0.5, 0.2, 0.0};
  net.uplink_price = {2.0, 0.0, 0.0};
  net.storage_cap = {std::nullopt, std::nullopt, 1.0};
  net.uplink_cap = {std::nullopt, std::nullopt, 5.0};
  net.finalize();
  return net;
}

DemandModel chain_demand() {
  DemandModel dm;
  DemandModel::CpDemand d;
  d.catalog = Catalog{0, 2, 1.0};
  d.leaf_total_mbps = {0.0, 0.0, 7.0};
  d.explicit_rates[2] = {4.0, 3.0};
  dm.add_cp(std::move(d));
  return dm;
}

CatalogPlacement plc(CpId cp, std::vector<std::vector<NodeId>> open,
                     std::vector<std::vector<NodeId>> server) {
  CatalogPlacement p;
  p.cp = cp;
  p.open = std::move(open);
  p.server = std::move(server);
  return p;
}

DualState random_duals(const LagrangianEngine& eng, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  DualState d = eng.zero_duals();
  for (NodeId n : eng.storage_capped()) d.sigma[static_cast<std::size_t>(n)] = uni(gen);
  for (NodeId n : eng.bandwidth_capped()) d.beta[static_cast<std::size_t>(n)] = uni(gen);
  return d;
}

// Valid placement with random copy sets; each leaf reads from its nearest
// copy, except an occasional deliberate fallback to the origin.
std::vector<CatalogPlacement> random_placements(const TreeNetwork& net, const DemandModel& dm,
                                                std::mt19937_64& gen) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<CatalogPlacement> out;
  for (std::size_t k = 0; k < dm.num_cps(); ++k) {
    CatalogPlacement p;
    p.cp = static_cast<CpId>(k);
    const std::int64_t files = dm.of(static_cast<CpId>(k)).catalog.files;
    for (std::int64_t f = 0; f < files; ++f) {
      std::vector<NodeId> open;
      for (std::size_t i = 0; i < net.parent.size(); ++i) {
        if (uni(gen) < 0.3) open.push_back(static_cast<NodeId>(i));
      }
      std::vector<NodeId> server;
      for (NodeId leaf : net.leaves) {
        NodeId at = kOrigin;
        if (uni(gen) >= 0.2) {
          for (NodeId x = leaf; x != kOrigin; x = net.parent[static_cast<std::size_t>(x)]) {
            if (std::binary_search(open.begin(), open.end(), x)) {
              at = x;
              break;
            }
          }
        }
        server.push_back(at);
      }
      p.open.push_back(std::move(open));
      p.server.push_back(std::move(server));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("utilities and relaxation value on a hand-checked chain") {
  const TreeNetwork net = chain_net();
  const DemandModel dm = chain_demand();

  // Savings against all-origin delivery; the capped leaf store is free.
  CHECK(utility(net, dm, {plc(0, {{2}, {}}, {{2}, {kOrigin}})}) == doctest::Approx(8.0));
  CHECK(utility(net, dm, {plc(0, {{1}, {}}, {{1}, {kOrigin}})}) == doctest::Approx(7.8));
  CHECK(utility(net, dm, {plc(0, {{0}, {}}, {{0}, {kOrigin}})}) == doctest::Approx(7.5));
  CHECK(utility(net, dm, {plc(0, {{}, {}}, {{kOrigin}, {kOrigin}})}) == doctest::Approx(0.0));
  // Capacity violations do not enter the utility itself.
  CHECK(utility(net, dm, {plc(0, {{2}, {2}}, {{2}, {2}})}) == doctest::Approx(14.0));

  // One content at the leaf: storage slack 0, uplink slack 5 - 3 = 2.
  DualState d;
  d.sigma = {0.0, 0.0, 0.3};
  d.beta = {0.0, 0.0, 0.1};
  CHECK(lagrangian(net, dm, {plc(0, {{2}, {}}, {{2}, {kOrigin}})}, d) == doctest::Approx(8.2));

  LagrangianEngine eng(net, dm, {});
  CHECK(eng.storage_capped() == std::vector<NodeId>{2});
  CHECK(eng.bandwidth_capped() == std::vector<NodeId>{2});
  CHECK(eng.storage_cap_files(2) == 1);
  CHECK(eng.initial_upper_bound() == doctest::Approx(14.0));
  CHECK(eng.shadow_path_price(2, d) == doctest::Approx(2.1));
  CHECK(eng.shadow_path_price(0, d) == doctest::Approx(2.0));
}

TEST_CASE("input validation rejects malformed pricing, duals and placements") {
  const TreeNetwork net = chain_net();
  const DemandModel dm = chain_demand();

  // Priced but uncapped inner link: utilities and the relaxation would
  // disagree about who pays for it.
  TreeNetwork bad = net;
  bad.uplink_price[1] = 0.5;
  CHECK_THROWS_AS(LagrangianEngine(bad, dm, {}), std::invalid_argument);
  // A capped CO store or transit link has no elastic price to settle on.
  bad = net;
  bad.storage_cap[0] = 5.0;
  CHECK_THROWS_AS(LagrangianEngine(bad, dm, {}), std::invalid_argument);
  bad = net;
  bad.uplink_cap[0] = 100.0;
  CHECK_THROWS_AS(LagrangianEngine(bad, dm, {}), std::invalid_argument);

  const auto p_ok = plc(0, {{2}, {}}, {{2}, {kOrigin}});
  DualState d;
  d.sigma = {0.0, 0.0, -0.1};
  d.beta = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(lagrangian(net, dm, {p_ok}, d), std::invalid_argument);
  d.sigma = {0.0, 0.1, 0.0};  // shadow price on an elastic store
  CHECK_THROWS_AS(lagrangian(net, dm, {p_ok}, d), std::invalid_argument);
  d.sigma = {0.0, 0.0, 0.0};
  d.beta = {0.1, 0.0, 0.0};  // shadow price on the elastic transit link
  CHECK_THROWS_AS(lagrangian(net, dm, {p_ok}, d), std::invalid_argument);
  d.beta = {0.0, 0.0, 0.0};
  d.sigma = {0.0, 0.0};  // wrong length
  CHECK_THROWS_AS(lagrangian(net, dm, {p_ok}, d), std::invalid_argument);

  // Server pointing at a node that does not hold the content.
  CHECK_THROWS_AS(utility(net, dm, {plc(0, {{2}, {}}, {{2}, {2}})}), std::invalid_argument);
}

TEST_CASE("relaxed primal update dominates every explicit placement") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 gen(seed);
    const support::Toy toy = support::random_toy(gen, seed % 2 == 0);
    LagrangianEngine eng(toy.net, toy.demand, {});
    const DualState duals = random_duals(eng, gen);

    std::vector<CatalogPlacement> relaxed;
    for (std::size_t k = 0; k < eng.num_cps(); ++k) {
      relaxed.push_back(eng.primal_update(static_cast<CpId>(k), duals).placement);
    }
    const double l_star = lagrangian(toy.net, toy.demand, relaxed, duals);
    for (int trial = 0; trial < 10; ++trial) {
      const auto other = random_placements(toy.net, toy.demand, gen);
      const double l = lagrangian(toy.net, toy.demand, other, duals);
      CHECK(l_star >= l - 1e-9 * std::max(1.0, std::abs(l_star)));
    }
  }
}

TEST_CASE("published summaries agree with first-principles recomputation") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    std::mt19937_64 gen(seed);
    const support::Toy toy = support::random_toy(gen, seed % 2 == 1);
    LagrangianEngine eng(toy.net, toy.demand, {});
    const DualState duals = random_duals(eng, gen);
    const std::size_t n = toy.net.parent.size();

    std::vector<CatalogPlacement> placements;
    std::vector<CpSummary> sums;
    for (std::size_t k = 0; k < eng.num_cps(); ++k) {
      CpIterate it = eng.primal_update(static_cast<CpId>(k), duals);
      placements.push_back(it.placement);
      sums.push_back(it.summary);

      double transit = 0.0;
      for (double t : it.summary.transit_by_ano) transit += t;
      CHECK(transit == doctest::Approx(it.summary.residual_mbps[0]).epsilon(1e-12));
      double by_ano = 0.0;
      for (double u : it.summary.utility_by_ano) by_ano += u;
      CHECK(by_ano == doctest::Approx(it.summary.utility).epsilon(1e-12));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(it.summary.cached_gb[i] ==
              doctest::Approx(static_cast<double>(it.summary.cached_files[i]) *
                              toy.net.file_size_gb));
      }
      if (it.summary.cached_files[0] > 0) {
        double z = 0.0;
        for (double v : it.summary.zeta) z += v;
        CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
      }
      // Re-deriving the summary from the placement is a no-op.
      CpIterate again = it;
      eng.refresh_summary(again);
      CHECK(again.summary == it.summary);
    }
    CHECK(eng.utility_total(sums) ==
          doctest::Approx(utility(toy.net, toy.demand, placements)).epsilon(1e-12));
    CHECK(eng.lagrangian_value(sums, duals) ==
          doctest::Approx(lagrangian(toy.net, toy.demand, placements, duals)).epsilon(1e-12));
  }
}

TEST_CASE("driver produces monotone bounds and a feasible incumbent") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    std::mt19937_64 gen(seed);
    const support::Toy toy = support::random_toy(gen, true);
    const OptimizationResult res = orchestrate(toy.net, toy.demand, {});
    REQUIRE(!res.trace.empty());

    LagrangianEngine eng(toy.net, toy.demand, {});
    double prev_lb = 0.0;
    double prev_ub = eng.initial_upper_bound();
    double prev_gamma = 1.0;
    for (const IterationRecord& r : res.trace) {
      CHECK(r.lb >= prev_lb);
      CHECK(r.ub <= prev_ub + 1e-12);
      CHECK(r.gamma <= prev_gamma);
      CHECK(r.lb <= r.ub + 1e-9);
      CHECK(r.step >= 0.0);
      prev_lb = r.lb;
      prev_ub = r.ub;
      prev_gamma = r.gamma;
    }
    CHECK(res.lower_bound == res.trace.back().lb);
    CHECK(res.upper_bound == res.trace.back().ub);

    REQUIRE(res.best_tau >= 0);
    CHECK(res.best_placement.size() == eng.num_cps());
    CHECK(eng.feasible(res.best_summaries));
    CHECK(eng.utility_total(res.best_summaries) == doctest::Approx(res.lower_bound));
    CHECK(utility(toy.net, toy.demand, res.best_placement) == doctest::Approx(res.lower_bound));

    eng.check_duals(res.final_duals);  // in range and zero off the capped sets
  }
}

TEST_CASE("instance without capacities converges in one round") {
  TreeNetwork net = chain_net();
  net.storage_cap = {std::nullopt, std::nullopt, std::nullopt};
  net.uplink_cap = {std::nullopt, std::nullopt, std::nullopt};
  const DemandModel dm = chain_demand();

  const OptimizationResult res = orchestrate(net, dm, {});
  CHECK(res.reason == StopReason::converged);
  CHECK(res.trace.size() == 1);
  CHECK(res.best_tau == 1);
  // Free elastic leaf storage: everything cached at the leaf, full savings.
  CHECK(res.lower_bound == doctest::Approx(14.0));
  CHECK(res.upper_bound == doctest::Approx(res.lower_bound));
  REQUIRE(res.best_placement.size() == 1);
  CHECK(res.best_placement[0].open == std::vector<std::vector<NodeId>>{{2}, {2}});
}

TEST_CASE("storage quotas split contested slots and evictions relocate") {
  const TreeNetwork net = chain_net();
  DemandModel dm;
  for (int k = 0; k < 2; ++k) {
    DemandModel::CpDemand d;
    d.catalog = Catalog{static_cast<CpId>(k), 1, 1.0};
    const double lam = k == 0 ? 5.0 : 3.0;
    d.leaf_total_mbps = {0.0, 0.0, lam};
    d.explicit_rates[2] = {lam};
    dm.add_cp(std::move(d));
  }
  LagrangianEngine eng(net, dm, {});
  const DualState duals = eng.zero_duals();

  std::vector<CpIterate> its;
  std::vector<CpSummary> sums;
  for (CpId k = 0; k < 2; ++k) {
    its.push_back(eng.primal_update(k, duals));
    sums.push_back(its.back().summary);
  }
  // Both CPs want the single free leaf slot.
  CHECK(!eng.feasible(sums));
  const auto plan = eng.plan_projection(sums);
  REQUIRE(plan.size() == 2);
  REQUIRE(plan[0].storage_quota.size() == 1);
  REQUIRE(plan[1].storage_quota.size() == 1);
  // Equal counts; the tied remainder goes to the lower CP id.
  CHECK(plan[0].storage_quota[0] == std::pair<NodeId, std::int64_t>{2, 1});
  CHECK(plan[1].storage_quota[0] == std::pair<NodeId, std::int64_t>{2, 0});

  CHECK(eng.apply_projection(its[0], plan[0], duals));
  CHECK(eng.apply_projection(its[1], plan[1], duals));
  sums = {its[0].summary, its[1].summary};
  CHECK(eng.feasible(sums));
  CHECK(its[0].placement.open[0] == std::vector<NodeId>{2});
  // The evicted copy lands on the metered mid store (0.2 < 3 * 2 origin).
  CHECK(its[1].placement.open[0] == std::vector<NodeId>{1});
  CHECK(eng.utility_total(sums) == doctest::Approx(10.0 + 6.0 - 0.2));
}

TEST_CASE("link quotas are met by caching at the bottleneck") {
  TreeNetwork net = chain_net();
  net.storage_price = {0.5, 0.2, 7.0};  // leaf store metered but expensive
  net.storage_cap = {std::nullopt, std::nullopt, std::nullopt};
  net.uplink_cap = {std::nullopt, std::nullopt, 4.0};
  net.finalize();
  const DemandModel dm = chain_demand();

  // Both contents at the mid overload the 4 Mb/s leaf uplink with 7 Mb/s.
  auto out = project_to_feasible(net, dm, {plc(0, {{1}, {1}}, {{1}, {1}})});
  REQUIRE(out.ok);
  LagrangianEngine eng(net, dm, {});
  CHECK(eng.feasible(out.summaries));
  // The heavier content moves down; its idle mid copy is dropped.
  CHECK(out.placements[0].open[0] == std::vector<NodeId>{2});
  CHECK(out.placements[0].server[0] == std::vector<NodeId>{2});
  CHECK(out.placements[0].open[1] == std::vector<NodeId>{1});
  CHECK(out.summaries[0].residual_mbps[2] == doctest::Approx(3.0));
  CHECK(out.summaries[0].utility == doctest::Approx((8.0 - 7.0) + (6.0 - 0.2)));
}

TEST_CASE("evicted copies move to a metered store instead of the origin") {
  const TreeNetwork net = chain_net();
  const DemandModel dm = chain_demand();

  // Two contents forced into the single leaf slot.
  auto out = project_to_feasible(net, dm, {plc(0, {{2}, {2}}, {{2}, {2}})});
  REQUIRE(out.ok);
  CHECK(out.placements[0].open[0] == std::vector<NodeId>{2});
  // 0.2 at the mid beats 3 * 2 = 6 of origin transit; ties evict the less
  // popular content.
  CHECK(out.placements[0].open[1] == std::vector<NodeId>{1});
  CHECK(out.summaries[0].utility == doctest::Approx(8.0 + 6.0 - 0.2));
}

TEST_CASE("projection reports unrepairable instances") {
  TreeNetwork net = chain_net();
  // One leaf slot removes at most 4 Mb/s from the uplink; 3 still exceed 2.
  net.uplink_cap[2] = 2.0;
  const DemandModel dm = chain_demand();

  auto out = project_to_feasible(net, dm, {plc(0, {{}, {}}, {{kOrigin}, {kOrigin}})});
  CHECK(!out.ok);
}

TEST_CASE("settlement matches the hand formula") {
  const TreeNetwork net = chain_net();
  const DemandModel dm = chain_demand();
  LagrangianEngine eng(net, dm, {});

  CpIterate it;
  it.placement = plc(0, {{2}, {1}}, {{2}, {1}});
  eng.refresh_summary(it);
  CHECK(it.summary.utility == doctest::Approx(13.8));

  DualState d = eng.zero_duals();
  d.sigma[2] = 0.3;
  d.beta[2] = 0.1;
  const auto entries = settle(net, dm, {it.summary}, d, {{0.6}});
  REQUIRE(entries.size() == 1);
  // 7 * 2.1 shadow value - 3 * 0.1 residual leaf fee - (0.2 + 0.3) storage.
  CHECK(entries[0].saving == doctest::Approx(13.9));
  CHECK(entries[0].subsidy == doctest::Approx(0.6 * 13.9));
  CHECK(entries[0].storage_payment == doctest::Approx(0.2));  // metered mid only
  CHECK(entries[0].transit_payment == doctest::Approx(0.0));

  // At zero shadow prices the saving is exactly the forecast utility.
  const auto at_zero = settle(net, dm, {it.summary}, eng.zero_duals(), {{0.6}});
  CHECK(at_zero[0].saving == doctest::Approx(it.summary.utility_by_ano[0]));
  const auto no_share = settle(net, dm, {it.summary}, d, {{0.0}});
  CHECK(no_share[0].subsidy == doctest::Approx(0.0));

  // Echoing the forecasts as measurements changes nothing.
  MeasuredTraffic m;
  m.leaf_total_mbps = {{0.0, 0.0, 7.0}};
  m.residual_mbps = {it.summary.residual_mbps};
  m.transit_by_ano = {it.summary.transit_by_ano};
  const auto echoed = settle(net, dm, {it.summary}, d, {{0.6}}, &m);
  CHECK(echoed[0].saving == doctest::Approx(entries[0].saving));
  CHECK(echoed[0].subsidy == doctest::Approx(entries[0].subsidy));

  // Doubled measured demand at unchanged residuals doubles the gross term.
  m.leaf_total_mbps = {{0.0, 0.0, 14.0}};
  const auto doubled = settle(net, dm, {it.summary}, d, {{0.6}}, &m);
  CHECK(doubled[0].saving == doctest::Approx(28.6));

  const DualState z = eng.zero_duals();
  CHECK_THROWS_AS(settle(net, dm, {it.summary}, z, {{1.2}}), std::invalid_argument);
  CHECK_THROWS_AS(settle(net, dm, {it.summary}, z, {{-0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(settle(net, dm, {it.summary}, z, {{0.5}, {0.5}}), std::invalid_argument);
  m.leaf_total_mbps = {{0.0, 0.0, -1.0}};
  CHECK_THROWS_AS(settle(net, dm, {it.summary}, z, {{0.6}}, &m), std::invalid_argument);
}

TEST_CASE("settlement agrees with the aggregate ledger when only the CO caches") {
  // Two ANOs, one leaf each; every store except the CO is priced out, so
  // the optimizer reduces to the shared-cache threshold game.
  TreeNetwork net;
  net.parent = {kOrigin, 0, 1, 0, 3};
  net.ano = {kNoAno, 0, 0, 1, 1};
  net.file_size_gb = 1.0;
  net.storage_price = {6.0, 1e6, 1e6, 1e6, 1e6};
  net.uplink_price = {2.0, 0.0, 0.0, 0.0, 0.0};
  net.storage_cap.assign(5, std::nullopt);
  net.uplink_cap.assign(5, std::nullopt);
  net.finalize();

  DemandModel dm;
  DemandModel::CpDemand d;
  d.catalog = Catalog{0, 4, 1.0};
  d.leaf_total_mbps = {0.0, 0.0, 7.5, 0.0, 11.25};
  d.explicit_rates[2] = {4.0, 2.0, 1.0, 0.5};
  d.explicit_rates[4] = {6.0, 3.0, 1.5, 0.75};
  dm.add_cp(std::move(d));

  const OptimizationResult res = orchestrate(net, dm, {});
  CHECK(res.reason == StopReason::converged);
  REQUIRE(res.best_tau >= 0);
  // Aggregate demand 10, 5, 2.5, 1.25 against the threshold 6 / 2 = 3.
  CHECK(res.best_placement[0].open ==
        std::vector<std::vector<NodeId>>{{0}, {0}, {}, {}});
  CHECK(res.best_summaries[0].zeta[0] == doctest::Approx(0.4));
  CHECK(res.best_summaries[0].zeta[1] == doctest::Approx(0.6));
  CHECK(res.lower_bound == doctest::Approx(18.0));

  const auto g = CoGame::explicit_demand({{4.0, 2.0, 1.0, 0.5}, {6.0, 3.0, 1.5, 0.75}}, 6.0,
                                         2.0, {0.5, 0.25});
  const ValueLedger ledger = zeta_distribution(g, {0, 1});
  const auto entries =
      settle(net, dm, res.best_summaries, res.final_duals, {{0.5}, {0.25}});
  REQUIRE(entries.size() == 2);
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(entries[a].saving == doctest::Approx(ledger.phi[a]).epsilon(1e-9));
    CHECK(entries[a].subsidy == doctest::Approx(ledger.subsidy[a]).epsilon(1e-9));
  }
  CHECK(entries[0].storage_payment == doctest::Approx(0.4 * 2.0 * 6.0));
  CHECK(entries[1].storage_payment == doctest::Approx(0.6 * 2.0 * 6.0));
  CHECK(entries[0].transit_payment == doctest::Approx(1.5 * 2.0));
  CHECK(entries[1].transit_payment == doctest::Approx(2.25 * 2.0));
}

TEST_CASE("skipping unpopular contents leaves the run unchanged on symmetric demand") {
  SymmetricSpec spec;
  spec.e1 = 2;
  spec.e2 = 1;
  spec.num_anos = 2;
  spec.file_size_gb = 1.0;
  spec.leaf = {0.0, 0.0, 2.0, std::nullopt};
  spec.mid = {0.4, 0.0, std::nullopt, 18.0};
  spec.root = {0.5, 3.0, std::nullopt, std::nullopt};
  const TreeNetwork net = build_symmetric_3tier(spec);

  DemandModel dm;
  dm.add_cp(synthesize_zipf_demand(net, Catalog{0, 20, 1.0}, {30.0, 30.0}, 0.8, false, 7));

  OptimizeParams full;
  full.tau_max = 60;
  OptimizeParams skipping = full;
  skipping.early_stop = true;

  const OptimizationResult a = orchestrate(net, dm, full);
  const OptimizationResult b = orchestrate(net, dm, skipping);
  CHECK(a.trace == b.trace);
  CHECK(a.final_duals == b.final_duals);
  CHECK(a.best_tau == b.best_tau);
  REQUIRE(a.best_placement.size() == b.best_placement.size());
  for (std::size_t k = 0; k < a.best_placement.size(); ++k) {
    CHECK(a.best_placement[k].open == b.best_placement[k].open);
    CHECK(a.best_placement[k].server == b.best_placement[k].server);
  }
}

TEST_CASE("bounds sandwich the exhaustive optimum on random toys") {
  int tested = 0;
  for (std::uint64_t seed = 1; seed <= 60 && tested < 10; ++seed) {
    std::mt19937_64 gen(seed);
    const support::Toy toy = support::random_toy(gen, seed % 2 == 0);
    const support::ToyOptimum opt = support::exhaustive_optimum(toy.net, toy.demand);
    // The driver's trivial lower bound starts at zero, so only instances
    // whose optimum clears zero make meaningful sandwiches.
    if (!opt.any_feasible || opt.utility < 0.0) continue;
    ++tested;

    const OptimizationResult res = orchestrate(toy.net, toy.demand, {});
    REQUIRE(res.best_tau >= 0);
    const double tol = 1e-7 * std::max(1.0, std::abs(opt.utility));
    for (const IterationRecord& r : res.trace) {
      CHECK(r.lb <= opt.utility + tol);
      CHECK(r.ub >= opt.utility - tol);
    }
    CHECK(res.lower_bound >= 0.99 * opt.utility - 1e-9);
  }
  CHECK(tested == 10);
}
