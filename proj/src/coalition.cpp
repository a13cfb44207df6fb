#include "cachesub/coalition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cachesub/numeric.hpp"

namespace cachesub {

CoGame CoGame::explicit_demand(std::vector<std::vector<double>> rates, double s, double b,
                               std::vector<double> share) {
  if (rates.empty() || rates.size() != share.size()) {
    throw std::invalid_argument("one demand row and one share per operator required");
  }
  CoGame g;
  g.files_ = static_cast<std::int64_t>(rates.front().size());
  for (const auto& row : rates) {
    if (static_cast<std::int64_t>(row.size()) != g.files_) {
      throw std::invalid_argument("demand rows disagree on catalog size");
    }
  }
  g.s_ = s;
  g.b_ = b;
  g.share_ = std::move(share);
  g.rates_ = std::move(rates);
  return g;
}

CoGame CoGame::zipf_demand(std::vector<double> total_mbps, std::shared_ptr<const ZipfTable> zipf,
                           std::map<AnoId, std::vector<std::uint32_t>> rank_of, double s, double b,
                           std::vector<double> share) {
  if (total_mbps.empty() || total_mbps.size() != share.size()) {
    throw std::invalid_argument("one total and one share per operator required");
  }
  if (!zipf) throw std::invalid_argument("weight table required");
  CoGame g;
  g.files_ = zipf->files;
  g.s_ = s;
  g.b_ = b;
  g.share_ = std::move(share);
  g.total_ = std::move(total_mbps);
  g.zipf_ = std::move(zipf);
  g.rank_of_ = std::move(rank_of);
  return g;
}

double CoGame::rate(AnoId a, std::int64_t f) const {
  if (!rates_.empty()) return rates_[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)];
  std::int64_t rank = f;
  auto it = rank_of_.find(a);
  if (it != rank_of_.end()) rank = it->second[static_cast<std::size_t>(f)];
  return total_[static_cast<std::size_t>(a)] * zipf_->weight[static_cast<std::size_t>(rank)];
}

std::vector<std::int64_t> optimal_set(const CoGame& g, std::uint32_t members) {
  const double threshold = g.storage_price_per_content() / g.traffic_price();
  std::vector<std::int64_t> cached;
  for (std::int64_t f = 0; f < g.files(); ++f) {
    double agg = 0.0;
    for (AnoId a = 0; a < g.num_anos(); ++a) {
      if (members & (1u << static_cast<std::uint32_t>(a))) agg += g.rate(a, f);
    }
    if (agg > threshold) cached.push_back(f);
  }
  return cached;
}

double savings(const CoGame& g, const std::vector<std::int64_t>& cached, std::uint32_t members) {
  KahanSum e;
  for (std::int64_t f : cached) {
    double agg = 0.0;
    for (AnoId a = 0; a < g.num_anos(); ++a) {
      if (members & (1u << static_cast<std::uint32_t>(a))) agg += g.rate(a, f);
    }
    e.add(agg * g.traffic_price() - g.storage_price_per_content());
  }
  return e.value();
}

double coalition_value(const CoGame& g, std::uint32_t members) {
  return savings(g, optimal_set(g, members), members);
}

ValueLedger eta_distribution(const CoGame& g, const std::vector<std::int64_t>& cached,
                             bool keep_per_file) {
  const int anos = g.num_anos();
  ValueLedger led;
  led.cached = cached;
  led.phi.assign(static_cast<std::size_t>(anos), 0.0);
  if (keep_per_file) {
    led.eta.assign(static_cast<std::size_t>(anos), std::vector<double>(cached.size(), 0.0));
  }
  std::vector<KahanSum> phi(static_cast<std::size_t>(anos));
  std::vector<double> lam(static_cast<std::size_t>(anos));
  for (std::size_t i = 0; i < cached.size(); ++i) {
    const std::int64_t f = cached[i];
    double agg = 0.0;
    for (AnoId a = 0; a < anos; ++a) {
      lam[static_cast<std::size_t>(a)] = g.rate(a, f);
      agg += lam[static_cast<std::size_t>(a)];
    }
    if (agg == 0.0) continue;  // nobody asked for it; no value to split
    for (AnoId a = 0; a < anos; ++a) {
      const double eta = lam[static_cast<std::size_t>(a)] / agg;
      phi[static_cast<std::size_t>(a)].add(lam[static_cast<std::size_t>(a)] * g.traffic_price() -
                                           eta * g.storage_price_per_content());
      if (keep_per_file) led.eta[static_cast<std::size_t>(a)][i] = eta;
    }
  }
  KahanSum total;
  KahanSum sub_total;
  led.subsidy.assign(static_cast<std::size_t>(anos), 0.0);
  for (AnoId a = 0; a < anos; ++a) {
    led.phi[static_cast<std::size_t>(a)] = phi[static_cast<std::size_t>(a)].value();
    total.add(led.phi[static_cast<std::size_t>(a)]);
    led.subsidy[static_cast<std::size_t>(a)] =
        g.share()[static_cast<std::size_t>(a)] * led.phi[static_cast<std::size_t>(a)];
    sub_total.add(led.subsidy[static_cast<std::size_t>(a)]);
  }
  led.total_saving = total.value();
  led.subsidy_total = sub_total.value();
  return led;
}

ValueLedger zeta_distribution(const CoGame& g, const std::vector<std::int64_t>& cached) {
  const int anos = g.num_anos();
  ValueLedger led;
  led.cached = cached;
  std::vector<KahanSum> hit(static_cast<std::size_t>(anos));  // T_a h_a(C)
  for (std::int64_t f : cached) {
    for (AnoId a = 0; a < anos; ++a) hit[static_cast<std::size_t>(a)].add(g.rate(a, f));
  }
  double hit_sum = 0.0;
  std::vector<double> th(static_cast<std::size_t>(anos));
  for (AnoId a = 0; a < anos; ++a) {
    th[static_cast<std::size_t>(a)] = hit[static_cast<std::size_t>(a)].value();
    hit_sum += th[static_cast<std::size_t>(a)];
  }
  led.phi.assign(static_cast<std::size_t>(anos), 0.0);
  led.zeta.assign(static_cast<std::size_t>(anos), 0.0);
  led.subsidy.assign(static_cast<std::size_t>(anos), 0.0);
  const double storage_bill =
      static_cast<double>(cached.size()) * g.storage_price_per_content();
  KahanSum total;
  KahanSum sub_total;
  for (AnoId a = 0; a < anos; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    led.zeta[ai] = hit_sum > 0.0 ? th[ai] / hit_sum : 0.0;
    led.phi[ai] = th[ai] * g.traffic_price() - led.zeta[ai] * storage_bill;
    total.add(led.phi[ai]);
    led.subsidy[ai] = g.share()[ai] * led.phi[ai];
    sub_total.add(led.subsidy[ai]);
  }
  led.total_saving = total.value();
  led.subsidy_total = sub_total.value();
  return led;
}

std::vector<std::int64_t> subsidy_maximizing_set(const CoGame& g, const std::vector<double>& r) {
  if (r.size() != static_cast<std::size_t>(g.num_anos())) {
    throw std::invalid_argument("one share per operator required");
  }
  std::vector<std::int64_t> cached;
  std::vector<double> lam(r.size());
  for (std::int64_t f = 0; f < g.files(); ++f) {
    double agg = 0.0;
    double weighted = 0.0;
    for (AnoId a = 0; a < g.num_anos(); ++a) {
      lam[static_cast<std::size_t>(a)] = g.rate(a, f);
      agg += lam[static_cast<std::size_t>(a)];
      weighted += r[static_cast<std::size_t>(a)] * lam[static_cast<std::size_t>(a)];
    }
    if (agg == 0.0) continue;
    // Marginal subsidy of caching f: sum_a r_a (lambda_a b - eta_a s).
    if (weighted * g.traffic_price() - (weighted / agg) * g.storage_price_per_content() > 0.0) {
      cached.push_back(f);
    }
  }
  return cached;
}

std::vector<double> shapley_oracle(const CoGame& g) {
  const int players = g.num_anos() + 1;  // player 0 is the CP
  if (players > 8) throw std::invalid_argument("shapley enumeration is limited to 8 players");

  // v over player masks; only masks containing the CP generate value.
  const std::uint32_t full = (1u << static_cast<std::uint32_t>(players));
  std::vector<double> v(full, 0.0);
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    if ((mask & 1u) == 0) continue;
    v[mask] = coalition_value(g, mask >> 1);
  }

  std::vector<double> value(static_cast<std::size_t>(players), 0.0);
  std::vector<int> perm(static_cast<std::size_t>(players));
  std::iota(perm.begin(), perm.end(), 0);
  std::uint64_t count = 0;
  do {
    std::uint32_t mask = 0;
    for (int p : perm) {
      const std::uint32_t next = mask | (1u << static_cast<std::uint32_t>(p));
      value[static_cast<std::size_t>(p)] += v[next] - v[mask];
      mask = next;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& x : value) x /= static_cast<double>(count);
  return value;
}

std::vector<VerificationRow> verification_error_experiment(const VerificationParams& p) {
  if (p.repetitions < 1) throw std::invalid_argument("need at least one repetition");
  if (!(p.r2 > 0.0)) throw std::invalid_argument("r2 must be positive");
  const auto zipf = std::make_shared<const ZipfTable>(zipf_weights(p.files, p.alpha));
  const double threshold = p.storage_price_per_content / p.traffic_price;

  // Per-ANO errors do not depend on the shares (they cancel in the ratio),
  // so they are accumulated once per repetition.
  KahanSum err1_acc;
  KahanSum err2_acc;
  KahanSum frac_acc;
  std::vector<double> phi_eta1(static_cast<std::size_t>(p.repetitions));
  std::vector<double> phi_eta2(static_cast<std::size_t>(p.repetitions));
  std::vector<double> phi_zeta1(static_cast<std::size_t>(p.repetitions));
  std::vector<double> phi_zeta2(static_cast<std::size_t>(p.repetitions));

  std::vector<std::uint32_t> rank(static_cast<std::size_t>(p.files));
  for (int rep = 0; rep < p.repetitions; ++rep) {
    std::iota(rank.begin(), rank.end(), 0u);
    std::mt19937_64 gen(splitmix64(p.seed + static_cast<std::uint64_t>(rep)));
    deterministic_shuffle(rank, gen);

    KahanSum pe1, pe2, th1, th2;
    std::int64_t cached_count = 0;
    for (std::int64_t f = 0; f < p.files; ++f) {
      const double l1 = p.total1_mbps * zipf->weight[static_cast<std::size_t>(f)];
      const double l2 =
          p.total2_mbps * zipf->weight[static_cast<std::size_t>(rank[static_cast<std::size_t>(f)])];
      const double agg = l1 + l2;
      if (!(agg > threshold)) continue;
      ++cached_count;
      pe1.add(l1 * p.traffic_price - l1 / agg * p.storage_price_per_content);
      pe2.add(l2 * p.traffic_price - l2 / agg * p.storage_price_per_content);
      th1.add(l1);
      th2.add(l2);
    }
    const double storage_bill = static_cast<double>(cached_count) * p.storage_price_per_content;
    const double hits = th1.value() + th2.value();
    const double z1 = hits > 0.0 ? th1.value() / hits : 0.0;
    const double z2 = hits > 0.0 ? th2.value() / hits : 0.0;
    const auto ri = static_cast<std::size_t>(rep);
    phi_eta1[ri] = pe1.value();
    phi_eta2[ri] = pe2.value();
    phi_zeta1[ri] = th1.value() * p.traffic_price - z1 * storage_bill;
    phi_zeta2[ri] = th2.value() * p.traffic_price - z2 * storage_bill;
    err1_acc.add((phi_zeta1[ri] - phi_eta1[ri]) / phi_eta1[ri] * 100.0);
    err2_acc.add((phi_zeta2[ri] - phi_eta2[ri]) / phi_eta2[ri] * 100.0);
    frac_acc.add(static_cast<double>(cached_count) / static_cast<double>(p.files));
  }

  const double reps = static_cast<double>(p.repetitions);
  std::vector<VerificationRow> rows;
  rows.reserve(p.r1_grid.size());
  for (double r1 : p.r1_grid) {
    VerificationRow row;
    row.r1 = r1;
    row.err1 = err1_acc.value() / reps;
    row.err2 = err2_acc.value() / reps;
    row.cached_fraction = frac_acc.value() / reps;
    KahanSum tot;
    for (int rep = 0; rep < p.repetitions; ++rep) {
      const auto ri = static_cast<std::size_t>(rep);
      const double sub_eta = r1 * phi_eta1[ri] + p.r2 * phi_eta2[ri];
      const double sub_zeta = r1 * phi_zeta1[ri] + p.r2 * phi_zeta2[ri];
      tot.add((sub_zeta - sub_eta) / sub_eta * 100.0);
    }
    row.err_tot = tot.value() / reps;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cachesub
