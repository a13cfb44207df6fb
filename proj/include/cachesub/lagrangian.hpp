#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cachesub/demand.hpp"
#include "cachesub/net_model.hpp"
#include "cachesub/ufl.hpp"

namespace cachesub {

// Capacity-constrained placement optimization for one network shared by
// several CPs and ANOs. Pricing convention: capacity-limited resources are
// sunk costs (their fixed price counts as zero in utilities) and carry a
// shadow price instead; elastic resources keep their fixed price and never
// carry one. Utilities are monthly savings relative to serving everything
// from the origin.

// Shadow prices. Full-size per-node vectors; entries of nodes without the
// matching capacity are fixed at zero.
struct DualState {
  std::vector<double> sigma;  // storage, $/GB/month
  std::vector<double> beta;   // uplink bandwidth, $/(Mb/s)/month

  bool operator==(const DualState&) const = default;
};

// Per-CP aggregates reported after each primal update: exactly the
// summaries a CP may publish without exposing per-content demand.
struct CpSummary {
  CpId cp = 0;
  std::vector<std::int64_t> cached_files;  // per node, contents stored
  std::vector<double> cached_gb;           // per node, contents * file size
  std::vector<double> residual_mbps;       // per node, demand left on its uplink
  std::vector<double> transit_by_ano;      // per ANO, residual transit share
  std::vector<double> zeta;                // per ANO, CO cache cost share
  std::vector<double> utility_by_ano;      // per ANO, savings contribution
  double utility = 0.0;                    // sum over ANOs

  bool operator==(const CpSummary&) const = default;
};

// One CP's primal iterate: the placement plus its published summary.
struct CpIterate {
  CatalogPlacement placement;
  CpSummary summary;
};

// Orchestrator-side projection plan: per-CP resource quotas restoring
// feasibility, computed from the published summaries only. The CPs apply
// the quotas locally (evict / add copies) since only they know demand.
struct CpProjectionDirective {
  CpId cp = 0;
  // Per storage-capped node: max contents this CP may keep there.
  std::vector<std::pair<NodeId, std::int64_t>> storage_quota;
  // Per bandwidth-capped link: max residual Mb/s this CP may leave on it.
  std::vector<std::pair<NodeId, double>> bandwidth_quota;

  bool empty() const { return storage_quota.empty() && bandwidth_quota.empty(); }
};

struct Subgradients {
  // One entry per capacity-limited resource, aligned with
  // LagrangianEngine::storage_capped() / bandwidth_capped(). Raw values:
  // negative for slack resources, positive for violated ones.
  std::vector<double> storage;    // GB
  std::vector<double> bandwidth;  // Mb/s
  double norm2 = 0.0;
};

struct OptimizeParams {
  double gamma = 1.0;             // Polyak scale factor
  double epsilon_fraction = 1e-3; // stop gap as a fraction of the initial UB
  int tau_max = 500;
  int stall_limit = 10;           // halve gamma after this many flat-UB rounds
  // Skip per-content solves once a more popular content was refused
  // everywhere. Exact when every leaf follows the same popularity law
  // (per-content demand vectors stay proportional); do not enable for
  // permuted or explicit per-leaf demand.
  bool early_stop = false;
};

enum class StopReason {
  converged,         // UB - LB <= epsilon
  iteration_limit,   // tau_max reached
  no_feasible_found, // tau_max reached and no iterate passed the checks
  zero_subgradient,  // all capacity constraints exactly tight; duals optimal
};

std::string to_string(StopReason r);

struct IterationRecord {
  int tau = 0;
  double utility = 0.0;     // of the iterate used for the LB update (projected if needed)
  double lagrangian = 0.0;  // of the relaxed optimum at this round's duals
  double lb = 0.0;
  double ub = 0.0;
  double step = 0.0;        // delta sent to the ANOs for the next round
  double gamma = 0.0;
  bool feasible = false;    // a feasible candidate existed this round
  bool projected = false;   // the candidate came from the projection

  bool operator==(const IterationRecord&) const = default;
};

struct OptimizationResult {
  std::vector<CatalogPlacement> best_placement;  // per CP; empty if none found
  std::vector<CpSummary> best_summaries;
  DualState final_duals;
  std::vector<IterationRecord> trace;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  int best_tau = -1;
  StopReason reason = StopReason::no_feasible_found;
};

// The round-level machinery shared by the monolithic driver below and the
// message-passing harness, so both produce bit-identical traces. All
// methods are deterministic and iteration-order-stable.
class LagrangianEngine {
 public:
  LagrangianEngine(const TreeNetwork& net, const DemandModel& demand, OptimizeParams params);

  const TreeNetwork& net() const { return *net_; }
  const DemandModel& demand() const { return *demand_; }
  const OptimizeParams& params() const { return params_; }
  int num_anos() const { return net_->num_anos; }
  std::size_t num_cps() const { return demand_->num_cps(); }

  // Nodes with a storage capacity / links with a bandwidth capacity
  // (ascending node id). Only these carry duals and subgradients.
  const std::vector<NodeId>& storage_capped() const { return storage_capped_; }
  const std::vector<NodeId>& bandwidth_capped() const { return bandwidth_capped_; }
  std::int64_t storage_cap_files(NodeId n) const;

  double initial_upper_bound() const;  // total demand times the transit price
  DualState zero_duals() const;

  // Relaxed per-CP optimum at the given shadow prices: one UFL per content
  // with open cost (s_n + sigma_n) * file_size and link price b_n + beta_n
  // (fixed prices zeroed on capacity-limited resources).
  CpIterate primal_update(CpId k, const DualState& duals) const;

  // Recomputes the summary aggregates from the placement (after edits).
  void refresh_summary(CpIterate& it) const;

  // Exact feasibility of the combined summaries: integer content counts
  // against storage capacities, plain float compare against bandwidth.
  bool feasible(const std::vector<CpSummary>& sums) const;
  std::vector<std::string> violations(const std::vector<CpSummary>& sums) const;

  // Per-CP quotas restoring feasibility; empty directives when already
  // feasible. Storage: largest-remainder apportionment proportional to
  // current counts. Bandwidth: proportional flow quotas with a one-ulp
  // safety factor so the repaired float sums stay within capacity.
  std::vector<CpProjectionDirective> plan_projection(const std::vector<CpSummary>& sums) const;

  // CP-side quota application: evict lowest-marginal-value copies from
  // over-quota storage nodes (re-routing their flows upward), then serve
  // over-quota links by adding copies at the violated link's node, in
  // decreasing order of crossing demand (deepest links first). The duals
  // only price the eviction order. Returns false when the quotas cannot be
  // met (no elastic target / headroom).
  bool apply_projection(CpIterate& it, const CpProjectionDirective& d,
                        const DualState& duals) const;

  double utility_total(const std::vector<CpSummary>& sums) const;
  double lagrangian_value(const std::vector<CpSummary>& sums, const DualState& duals) const;
  Subgradients subgradients(const std::vector<CpSummary>& sums) const;

  // Polyak step: gamma * |L - LB| / ||grad||^2; nullopt when the gradient
  // vanishes (duals cannot move; the relaxation is settled).
  std::optional<double> polyak_step(double gamma, double lagrangian, double lb,
                                    const Subgradients& g) const;

  // In-place subgradient ascent step, clipped at zero. With only_ano set,
  // touches just that ANO's nodes (the per-agent view of the same update).
  void dual_update(DualState& duals, double step, const Subgradients& g,
                   AnoId only_ano = kNoAno) const;

  // Effective fixed prices (sunk resources zeroed) used everywhere above.
  double storage_price_eff(NodeId n) const { return storage_eff_[static_cast<std::size_t>(n)]; }
  double uplink_price_eff(NodeId n) const { return uplink_eff_[static_cast<std::size_t>(n)]; }
  double shadow_path_price(NodeId n, const DualState& duals) const;

  // Demand lookup bypassing the per-call map lookups of DemandModel.
  double rate(CpId k, std::size_t leaf_pos, std::int64_t f) const;
  double leaf_total(CpId k, std::size_t leaf_pos) const;
  double aggregate_rate(CpId k, std::int64_t f) const;  // across all leaves

  // Shape and sign checks; throws std::invalid_argument on bad duals.
  void check_duals(const DualState& duals) const;

 private:
  const TreeNetwork* net_;
  const DemandModel* demand_;
  OptimizeParams params_;
  std::vector<NodeId> storage_capped_;
  std::vector<NodeId> bandwidth_capped_;
  std::vector<std::int64_t> cap_files_;  // aligned with storage_capped_
  std::vector<double> storage_eff_;
  std::vector<double> uplink_eff_;

  struct CpView {  // fast demand access per CP
    std::vector<double> leaf_totals;               // by leaf position
    std::vector<double> ano_totals;                // by ANO id
    std::vector<const std::uint32_t*> rank_by_leaf; // null = identity
    std::vector<const double*> explicit_by_leaf;   // per-file tables, or null
    const ZipfTable* zipf = nullptr;
    std::int64_t files = 0;
  };
  std::vector<CpView> views_;
  std::vector<std::vector<std::size_t>> under_;  // leaf positions below each node

  void build_views();
  void check_pricing() const;
};

// Monolithic Algorithm-1 driver: rounds of primal updates, feasibility
// check (with projection when violated), bound updates, Polyak step and
// dual updates, until the gap closes or tau_max.
OptimizationResult orchestrate(const TreeNetwork& net, const DemandModel& demand,
                               const OptimizeParams& params);

// Savings of a concrete placement (one entry per CP) under effective fixed
// prices. Throws std::invalid_argument when servers point at nodes that do
// not hold the content.
double utility(const TreeNetwork& net, const DemandModel& demand,
               const std::vector<CatalogPlacement>& placements);

// utility minus the capacity-violation penalties at the given duals.
double lagrangian(const TreeNetwork& net, const DemandModel& demand,
                  const std::vector<CatalogPlacement>& placements, const DualState& duals);

// Standalone projection of an arbitrary placement onto the capacity
// constraints (same rules as the in-loop projection). ok=false when the
// instance cannot be repaired.
struct ProjectionOutcome {
  std::vector<CatalogPlacement> placements;
  std::vector<CpSummary> summaries;
  bool ok = false;
};
ProjectionOutcome project_to_feasible(const TreeNetwork& net, const DemandModel& demand,
                                      std::vector<CatalogPlacement> placements);

// End-of-day payments between one ANO and one CP.
struct SettlementEntry {
  AnoId ano = 0;
  CpId cp = 0;
  double saving = 0.0;           // bracketed term of the subsidy formula
  double subsidy = 0.0;          // share * saving
  double storage_payment = 0.0;  // elastic storage the ANO pays for
  double transit_payment = 0.0;  // residual transit the ANO pays for
};

// Measured busy-period traffic; when null, forecasts are echoed.
struct MeasuredTraffic {
  std::vector<std::vector<double>> leaf_total_mbps;  // [cp][node]
  std::vector<std::vector<double>> residual_mbps;    // [cp][node]
  std::vector<std::vector<double>> transit_by_ano;   // [cp][ano]
};

// Subsidy of ANO a to CP k: share r_ak times the ANO's realized saving
// (shadow + transit prices on measured demand, minus residual link fees,
// minus reserved storage bills with the CO split by the reported zeta).
std::vector<SettlementEntry> settle(const TreeNetwork& net, const DemandModel& demand,
                                    const std::vector<CpSummary>& summaries,
                                    const DualState& duals,
                                    const std::vector<std::vector<double>>& share_ano_cp,
                                    const MeasuredTraffic* measured = nullptr);

}  // namespace cachesub
