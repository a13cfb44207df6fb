#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cachesub/coalition.hpp"
#include "cachesub/demand.hpp"
#include "cachesub/lagrangian.hpp"
#include "cachesub/net_model.hpp"
#include "cachesub/tradeoff.hpp"

namespace cachesub {

// Versioned experiment configuration (JSON, schema version 1). Parsing is
// strict: unknown keys, missing physical quantities, or out-of-range values
// are hard errors naming the offending field; only algorithm parameters
// have (documented) defaults. The same file plus the same seed always
// yields the same experiment.
//
// Layout:
//   version            1
//   seed               optional unsigned, default 0 (CLI --seed overrides)
//   network            optional; kind "symmetric3" (e1, e2, anos, per-tier
//                      prices/caps) or "explicit" (per-node arrays)
//   demand             with network; one entry per CP: kind "zipf" (files,
//                      alpha, per_ano_total_mbps, permute_per_ano) or
//                      "explicit" (files, rates per leaf)
//   shares             optional r[ano][cp] matrix in [0,1]
//   algorithm          optional gamma/epsilon_fraction/tau_max/stall_limit/
//                      early_stop
//   tradeoff           optional dimensioning sweep (catalog_gb, alpha, e1,
//                      e2, storage_price[3], link_price[3], gammas or
//                      gamma_grid, subsets)
//   coalition          optional estimator-error experiment parameters
//   ufl                optional { early_stop }

struct TradeoffConfig {
  TierParams base;  // demand is swept via the gamma grid
  std::vector<double> gammas;
  std::vector<std::array<bool, 3>> subsets;
};

struct Scenario {
  int version = 1;
  std::uint64_t seed = 0;
  bool has_network = false;
  TreeNetwork net;
  DemandModel demand;
  std::vector<std::vector<double>> shares;  // [ano][cp]; empty when absent
  OptimizeParams algorithm;
  std::optional<TradeoffConfig> tradeoff;
  std::optional<VerificationParams> coalition;  // seed = scenario seed
  bool ufl_early_stop = false;
  std::uint64_t content_hash = 0;  // FNV-1a of the source bytes
};

// Both throw std::runtime_error with a field-path diagnostic.
Scenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed_override);
Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override);

}  // namespace cachesub
