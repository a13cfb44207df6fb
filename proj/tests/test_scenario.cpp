#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "cachesub/csvio.hpp"
#include "cachesub/demand.hpp"
#include "cachesub/numeric.hpp"
#include "cachesub/scenario.hpp"

using namespace cachesub;

namespace {

// Error-path helper: parsing must fail and the diagnostic must name the
// offending field.
void rejects(const std::string& text, const std::string& needle) {
  try {
    parse_scenario(text, std::nullopt);
    FAIL_CHECK("accepted: " << text);
  } catch (const std::runtime_error& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  std::string(e.what()) << " does not mention " << needle);
  }
}

const char* kChainScenario = R"({
  "version": 1,
  "seed": 7,
  "network": {
    "kind": "explicit",
    "file_size_gb": 1.0,
    "parent": [-1, 0, 1],
    "ano": [-1, 0, 0],
    "storage_price": [0.5, 0.2, 0.0],
    "uplink_price": [2.0, 0.0, 0.0],
    "storage_cap_gb": [null, null, 1.0],
    "uplink_cap_mbps": [null, null, 5.0]
  },
  "demand": [
    { "kind": "explicit", "files": 2, "rates": { "2": [4.0, 3.0] } }
  ],
  "shares": [[0.6]]
})";

}  // namespace

TEST_CASE("format_g9 renders nine significant digits") {
  CHECK(format_g9(0.0) == "0");
  CHECK(format_g9(1.5) == "1.5");
  CHECK(format_g9(2.0 / 3.0) == "0.666666667");
  CHECK(format_g9(0.7496985921446702) == "0.749698592");
  CHECK(format_g9(-2.5e-07) == "-2.5e-07");
  CHECK(format_g9(1e300) == "1e+300");
}

TEST_CASE("hash_hex is fixed-width lowercase") {
  CHECK(hash_hex(0) == "0000000000000000");
  CHECK(hash_hex(0xdeadbeefull) == "00000000deadbeef");
  CHECK(hash_hex(~0ull) == "ffffffffffffffff");
}

TEST_CASE("output tables render deterministically in both formats") {
  auto build = [] {
    OutputTable t;
    t.metadata = {{"tool_version", kToolVersion}, {"seed", "3"}};
    t.columns = {"name", "value", "flag"};
    t.add_row({"plain", 1.0 / 3.0, true});
    t.add_row({"needs \"quoting\", really", -7, false});
    return t;
  };
  const OutputTable t = build();

  const std::string csv = t.to_csv();
  CHECK(csv == "# tool_version: 1.0.0\n# seed: 3\nname,value,flag\nplain,0.333333333,true\n"
               "\"needs \"\"quoting\"\", really\",-7,false\n");
  CHECK(build().to_csv() == csv);

  const auto doc = nlohmann::ordered_json::parse(t.to_json());
  CHECK(doc["metadata"]["seed"] == "3");
  CHECK(doc["columns"].size() == 3);
  CHECK(doc["rows"][0][1] == 1.0 / 3.0);  // full precision survives JSON
  CHECK(build().to_json() == t.to_json());

  CHECK(t.render("csv") == csv);
  CHECK(t.render("json") == t.to_json());
  CHECK_THROWS_AS(t.render("yaml"), std::invalid_argument);
  OutputTable bad = build();
  CHECK_THROWS_AS(bad.add_row({"only one"}), std::invalid_argument);
}

TEST_CASE("text file helpers round-trip and flag missing paths") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "cachesub_io_check.txt").string();
  write_text_file(path, "line\n");
  CHECK(read_text_file(path) == "line\n");
  std::filesystem::remove(path);
  CHECK_THROWS_WITH_AS(read_text_file("/nonexistent/cachesub.json"),
                       doctest::Contains("file not found:"), std::runtime_error);
}

TEST_CASE("minimal scenario parses with defaults") {
  const Scenario sc = parse_scenario(R"({"version": 1})", std::nullopt);
  CHECK(sc.seed == 0);
  CHECK_FALSE(sc.has_network);
  CHECK_FALSE(sc.tradeoff.has_value());
  CHECK_FALSE(sc.coalition.has_value());
  CHECK(sc.shares.empty());
  CHECK(sc.algorithm.gamma == 1.0);
  CHECK(sc.algorithm.epsilon_fraction == 1e-3);
  CHECK(sc.algorithm.tau_max == 500);
  CHECK(sc.algorithm.stall_limit == 10);
  CHECK_FALSE(sc.algorithm.early_stop);
  CHECK_FALSE(sc.ufl_early_stop);
}

TEST_CASE("schema violations are hard errors naming the field") {
  rejects(R"({"version": 2})", "version");
  rejects(R"({"version": 1, "bogus": 3})", "bogus");
  rejects(R"({"version": 1, "seed": -4})", "seed");
  rejects(R"({"version": 1, "network": {"kind": "explicit"},
    "demand": [{"kind": "explicit", "files": 1, "rates": {}}]})", "file_size_gb");
  rejects(R"({"version": 1, "demand": []})", "network and demand");
  rejects(R"({"version": 1, "shares": [[0.5]]})", "shares");
  rejects(R"({not json)", "invalid JSON");
  // Unknown nested keys and wrong shapes carry their path.
  rejects(R"({"version": 1, "tradeoff": {"catalog_gb": 1, "alpha": 0.5, "e1": 1, "e2": 1,
    "storage_price": [1,1,1], "link_price": [1,1,1], "gammas": [1], "gamma_grid":
    {"min": 1, "max": 2, "points": 3}}})", "exactly one of gammas");
  rejects(R"({"version": 1, "tradeoff": {"catalog_gb": 1, "alpha": 0.5, "e1": 1, "e2": 1,
    "storage_price": [1,1,1], "link_price": [1,1,1]}})", "gammas");
  rejects(R"({"version": 1, "tradeoff": {"catalog_gb": 1, "alpha": 1.2, "e1": 1, "e2": 1,
    "storage_price": [1,1,1], "link_price": [1,1,1], "gammas": [1]}})", "alpha");
  rejects(R"({"version": 1, "ufl": {"early_stop": "yes"}})", "early_stop");
  rejects(R"({"version": 1, "coalition": {"files": 10, "alpha": 0.8}})", "total1_mbps");
}

TEST_CASE("explicit network and demand round-trip") {
  const Scenario sc = parse_scenario(kChainScenario, std::nullopt);
  REQUIRE(sc.has_network);
  CHECK(sc.seed == 7);
  CHECK(sc.net.parent == std::vector<NodeId>{kOrigin, 0, 1});
  CHECK(sc.net.ano == std::vector<AnoId>{kNoAno, 0, 0});
  CHECK(sc.net.num_anos == 1);
  CHECK(sc.net.leaves == std::vector<NodeId>{2});
  REQUIRE(sc.net.storage_cap[2].has_value());
  CHECK(*sc.net.storage_cap[2] == 1.0);
  CHECK_FALSE(sc.net.storage_cap[1].has_value());
  REQUIRE(sc.demand.num_cps() == 1);
  CHECK(sc.demand.rate(sc.net, 0, 2, 0) == 4.0);
  CHECK(sc.demand.rate(sc.net, 0, 2, 1) == 3.0);
  CHECK(sc.demand.leaf_total(0, 2) == 7.0);
  CHECK(sc.shares == std::vector<std::vector<double>>{{0.6}});

  // The source bytes fix the hash; a cosmetic change moves it.
  CHECK(sc.content_hash ==
        fnv1a64(kChainScenario, std::string(kChainScenario).size()));
  const Scenario sc2 = parse_scenario(std::string(kChainScenario) + "\n", std::nullopt);
  CHECK(sc2.content_hash != sc.content_hash);
}

TEST_CASE("explicit demand validates leaf references") {
  std::string broken = kChainScenario;
  const auto at = broken.find("\"2\"");
  broken.replace(at, 3, "\"1\"");  // node 1 is interior
  rejects(broken, "not a leaf");
  std::string short_rates = kChainScenario;
  const auto rat = short_rates.find("[4.0, 3.0]");
  short_rates.replace(rat, 10, "[4.0]");
  rejects(short_rates, "one rate per content");
}

TEST_CASE("symmetric network with zipf demand matches the direct construction") {
  const char* text = R"({
    "version": 1,
    "seed": 11,
    "network": {
      "kind": "symmetric3",
      "file_size_gb": 0.001,
      "e1": 3, "e2": 2, "anos": 2,
      "leaf": {"storage_price": 0.0, "uplink_price": 0.0, "storage_cap_gb": 0.01},
      "mid": {"storage_price": 0.04, "uplink_price": 0.0, "uplink_cap_mbps": 50.0},
      "root": {"storage_price": 0.03, "uplink_price": 4.0}
    },
    "demand": [
      {"kind": "zipf", "files": 20, "alpha": 0.8,
       "per_ano_total_mbps": [30.0, 60.0], "permute_per_ano": true}
    ]
  })";
  const Scenario sc = parse_scenario(text, std::nullopt);
  REQUIRE(sc.has_network);
  CHECK(sc.net.num_anos == 2);
  CHECK(sc.net.size() == 1 + 4 + 12);
  CHECK(sc.net.leaves.size() == 12);
  REQUIRE(sc.net.uplink_cap[1].has_value());
  CHECK(*sc.net.uplink_cap[1] == 50.0);

  SymmetricSpec spec;
  spec.e1 = 3;
  spec.e2 = 2;
  spec.num_anos = 2;
  spec.file_size_gb = 0.001;
  spec.leaf.storage_cap = 0.01;
  spec.mid.storage_price = 0.04;
  spec.mid.uplink_cap = 50.0;
  spec.root.storage_price = 0.03;
  spec.root.uplink_price = 4.0;
  const TreeNetwork direct = build_symmetric_3tier(spec);
  CHECK(sc.net.parent == direct.parent);
  CHECK(sc.net.ano == direct.ano);
  CHECK(sc.net.storage_price == direct.storage_price);

  // CP sub-seed convention: splitmix64(seed ^ (cp+1)).
  const DemandModel::CpDemand direct_demand = synthesize_zipf_demand(
      direct, Catalog{0, 20, 0.001}, {30.0, 60.0}, 0.8, true, splitmix64(11ull ^ 1ull));
  const NodeId leaf = sc.net.leaves.front();
  for (std::int64_t f = 0; f < 20; ++f) {
    CHECK(sc.demand.rate(sc.net, 0, leaf, f) ==
          [&] {
            DemandModel dm;
            dm.add_cp(direct_demand);
            return dm.rate(direct, 0, leaf, f);
          }());
  }
}

TEST_CASE("seed override beats the file and feeds derived sections") {
  const char* text = R"({
    "version": 1,
    "seed": 3,
    "coalition": {
      "files": 100, "alpha": 0.5, "total1_mbps": 8.0, "total2_mbps": 4.0,
      "storage_price_per_content": 0.1, "traffic_price": 2.0
    }
  })";
  const Scenario by_file = parse_scenario(text, std::nullopt);
  CHECK(by_file.seed == 3);
  REQUIRE(by_file.coalition.has_value());
  CHECK(by_file.coalition->seed == 3);
  CHECK(by_file.coalition->r2 == 0.5);            // documented defaults
  CHECK(by_file.coalition->repetitions == 10);
  CHECK(by_file.coalition->r1_grid.size() == 9);

  const Scenario overridden = parse_scenario(text, 99);
  CHECK(overridden.seed == 99);
  CHECK(overridden.coalition->seed == 99);
  CHECK(overridden.content_hash == by_file.content_hash);  // hash covers bytes only
}

TEST_CASE("tradeoff grids expand log-spaced and default to all tiers") {
  const char* text = R"({
    "version": 1,
    "tradeoff": {
      "catalog_gb": 1000, "alpha": 0.6, "e1": 4, "e2": 5,
      "storage_price": [0.03, 0.03, 0.03], "link_price": [4, 4, 4],
      "gamma_grid": {"min": 0.1, "max": 1000, "points": 5}
    }
  })";
  const Scenario sc = parse_scenario(text, std::nullopt);
  REQUIRE(sc.tradeoff.has_value());
  const TradeoffConfig& cfg = *sc.tradeoff;
  CHECK(cfg.base.catalog_gb == 1000);
  CHECK(cfg.base.e1 == 4);
  REQUIRE(cfg.gammas.size() == 5);
  CHECK(cfg.gammas.front() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(cfg.gammas[2] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(cfg.gammas.back() == doctest::Approx(1000.0).epsilon(1e-12));
  REQUIRE(cfg.subsets.size() == 1);
  CHECK(cfg.subsets[0] == std::array<bool, 3>{true, true, true});
}

TEST_CASE("load_scenario surfaces missing files") {
  CHECK_THROWS_WITH_AS(load_scenario("/nonexistent/scenario.json", std::nullopt),
                       doctest::Contains("file not found:"), std::runtime_error);
}
