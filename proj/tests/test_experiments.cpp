#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vcq/errors.hpp"
#include "vcq/experiments.hpp"

using namespace vcq;
using nlohmann::json;

namespace {

json ge_sweep_config() {
  return json::parse(R"({
    "kind": "throughput_sweep",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125},
    "block_length": 40,
    "gamma": 0.2,
    "mean_packet_bits": 80,
    "sweep": {"variable": "memory", "values": [0.0, 0.2, 0.4]},
    "policies": [1, 2],
    "info_bits": "optimize"
  })");
}

int column_index(const ResultTable& table, const std::string& name) {
  for (size_t i = 0; i < table.columns.size(); ++i) {
    if (table.columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

TEST_CASE("config parsing rejects malformed documents with field paths") {
  auto expect_error = [](json doc, const std::string& field) {
    try {
      ExperimentConfig::from_json(doc);
      FAIL_CHECK("expected ConfigError for field ", field);
    } catch (const ConfigError& err) {
      CHECK(err.field_path == field);
    }
  };

  expect_error(json::parse(R"({"model": {}})"), "kind");
  expect_error(json::parse(R"({"kind": "warp_drive", "model": {}})"), "kind");

  json empty_sweep = ge_sweep_config();
  empty_sweep["sweep"]["values"] = json::array();
  expect_error(empty_sweep, "sweep.values");

  json bad_step = ge_sweep_config();
  bad_step["sweep"] = json{{"variable", "memory"}, {"from", 0.0}, {"to", 1.0}, {"step", 0.0}};
  expect_error(bad_step, "sweep.step");

  json no_sweep = ge_sweep_config();
  no_sweep.erase("sweep");
  expect_error(no_sweep, "sweep");

  json bad_bits = ge_sweep_config();
  bad_bits["info_bits"] = 99;
  expect_error(bad_bits, "info_bits");

  json bad_policy = ge_sweep_config();
  bad_policy["policies"] = json::array({0});
  expect_error(bad_policy, "policies[0]");

  json both_rho = ge_sweep_config();
  both_rho["rho"] = 0.01;
  expect_error(both_rho, "rho");

  json no_model = ge_sweep_config();
  no_model.erase("model");
  expect_error(no_model, "model");
}

TEST_CASE("throughput sweep emits ordered deterministic rows") {
  const auto config = ExperimentConfig::from_json(ge_sweep_config());
  const ResultTable serial = run(config, 1);
  const ResultTable parallel = run(config, 4);

  REQUIRE(serial.rows.size() == 3);
  CHECK(serial.columns.front() == "memory");
  CHECK(serial.rows[0][0] == 0.0);
  CHECK(serial.rows[2][0] == 0.4);
  CHECK(serial.rows == parallel.rows);
  CHECK(serial.columns == parallel.columns);
  CHECK(serial.metadata.at("config_hash") == parallel.metadata.at("config_hash"));

  // different config hashes distinguish tables
  json other = ge_sweep_config();
  other["gamma"] = 0.25;
  const ResultTable changed = run(ExperimentConfig::from_json(other), 1);
  CHECK(changed.metadata.at("config_hash") != serial.metadata.at("config_hash"));
}

TEST_CASE("crossover detection") {
  SUBCASE("grid estimate and bisection refinement on synthetic lines") {
    const std::vector<double> xs{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> ya, yb;
    for (double x : xs) {
      ya.push_back(1.0 - x);  // falling line
      yb.push_back(x);        // rising line, crossing at 0.5
    }
    CHECK(find_crossover(xs, ya, yb) == doctest::Approx(0.5).epsilon(1e-12));
    const double refined =
        refine_crossover(0.25, 0.75, [](double x) { return x - (1.0 - x); }, 1e-3);
    CHECK(refined == doctest::Approx(0.5).epsilon(2e-3));
  }

  SUBCASE("identical curves have no crossover") {
    const std::vector<double> xs{0.0, 0.5, 1.0};
    const std::vector<double> y{1.0, 2.0, 3.0};
    CHECK_THROWS_WITH_AS(find_crossover(xs, y, y), "no crossover in range",
                         std::runtime_error);
  }

  SUBCASE("same-sign difference has no crossover") {
    const std::vector<double> xs{0.0, 0.5, 1.0};
    const std::vector<double> ya{1.0, 1.0, 1.0};
    const std::vector<double> yb{2.0, 3.0, 2.5};
    CHECK_THROWS_AS(find_crossover(xs, ya, yb), std::runtime_error);
    CHECK_THROWS_AS(refine_crossover(0.0, 1.0, [](double) { return 1.0; }, 1e-3),
                    std::runtime_error);
  }
}

TEST_CASE("throughput sweep reports the static-vs-switching crossover") {
  json doc = ge_sweep_config();
  doc["sweep"] = json{{"variable", "memory"}, {"from", 0.0}, {"to", 0.6}, {"step", 0.1}};
  doc["crossover"] = true;
  const ResultTable table = run(ExperimentConfig::from_json(doc), 2);
  const int col = column_index(table, "crossover_memory");
  REQUIRE(col >= 0);
  const double crossover = table.rows[0][col];
  CHECK(crossover > 0.0);
  CHECK(crossover < 0.6);
  // switching beats static beyond the reported crossover
  const int tput_static = column_index(table, "throughput_ell1");
  const int tput_switch = column_index(table, "throughput_ell2");
  for (const auto& row : table.rows) {
    if (row[0] > crossover + 0.1) CHECK(row[tput_switch] > row[tput_static]);
    if (row[0] < crossover - 0.1) CHECK(row[tput_switch] < row[tput_static]);
  }
}

TEST_CASE("delay sweep flags unstable points instead of dropping them") {
  // ell = 3 on a two-state channel reconfigures always: zero service rate,
  // so that policy's rows must come back flagged while the static rows are
  // healthy.
  json doc = json::parse(R"({
    "kind": "delay_sweep",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125},
    "block_length": 40,
    "gamma": 0.15,
    "mean_packet_bits": 80,
    "sweep": {"variable": "memory", "values": [0.05, 0.3]},
    "policies": [1, 3],
    "info_bits": "optimize"
  })");
  const ResultTable table = run(ExperimentConfig::from_json(doc), 1);
  REQUIRE(table.rows.size() == 2);
  const int stable_static = column_index(table, "stable_ell1");
  const int stable_reconf = column_index(table, "stable_ell3");
  const int wait_static = column_index(table, "mean_wait_ell1");
  const int wait_reconf = column_index(table, "mean_wait_ell3");
  REQUIRE(stable_static >= 0);
  REQUIRE(stable_reconf >= 0);
  for (const auto& row : table.rows) {
    CHECK(row[stable_static] == 1.0);
    CHECK(std::isfinite(row[wait_static]));
    CHECK(row[stable_reconf] == 0.0);
    CHECK(std::isinf(row[wait_reconf]));
  }
  CHECK(table.metadata.at("unstable_rows").get<int>() == 2);
}

TEST_CASE("analyze emits one report row per policy") {
  json doc = json::parse(R"({
    "kind": "analyze",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125,
              "memory": 0.3},
    "block_length": 40,
    "gamma": 0.2,
    "mean_packet_bits": 80,
    "policies": [1, 2, 3],
    "info_bits": "optimize"
  })");
  const ResultTable table = run(ExperimentConfig::from_json(doc), 1);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.columns.front() == "policy_ell");
  CHECK(table.rows[0][0] == 1.0);
  CHECK(table.rows[1][0] == 2.0);
  CHECK(table.rows[2][0] == 3.0);  // always-reconfigure: zero service, flagged
  CHECK(table.metadata.at("unstable_rows").get<int>() >= 1);
}

TEST_CASE("boundary map recovers a synthetic boundary") {
  json doc = json::parse(R"({
    "kind": "boundary_map",
    "block_length": 40,
    "gamma": 0.2,
    "mean_packet_bits": 80,
    "average_erasure": 0.2,
    "eps_good_factor": 0.25,
    "sweep": {"variable": "eps_bad", "values": [0.5, 0.8]},
    "policies": [1, 2],
    "memory_bracket": [0.001, 0.98]
  })");
  const ResultTable table = run(ExperimentConfig::from_json(doc), 2);
  REQUIRE(table.rows.size() == 2);
  for (const auto& row : table.rows) {
    const double boundary = row[1];
    CHECK(boundary > 0.0);
    CHECK(boundary < 1.0);
  }
  // harsher bad state crosses over at lower memory
  CHECK(table.rows[1][1] < table.rows[0][1]);
}

TEST_CASE("simulate experiment wraps the Monte Carlo engine") {
  json doc = json::parse(R"({
    "kind": "simulate",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 0.5, "eps_good": 0.125,
              "memory": 0.3},
    "block_length": 40,
    "gamma": 0.2,
    "mean_packet_bits": 80,
    "policies": [1],
    "info_bits": 28,
    "horizon": 30000,
    "warmup": 2000,
    "seed": 17
  })");
  const ResultTable first = run(ExperimentConfig::from_json(doc), 1);
  const ResultTable second = run(ExperimentConfig::from_json(doc), 1);
  REQUIRE(first.rows.size() == 1);
  CHECK(first.rows == second.rows);
  CHECK(column_index(first, "hw_mean_queue") >= 0);

  json bad = doc;
  bad["info_bits"] = "optimize";
  CHECK_THROWS_AS(run(ExperimentConfig::from_json(bad), 1), ConfigError);
}

TEST_CASE("rayleigh sweep runs the preset model over doppler") {
  json doc = json::parse(R"({
    "kind": "rayleigh_sweep",
    "model": {"type": "rayleigh8"},
    "block_length": 40,
    "gamma": 0.2,
    "mean_packet_bits": 80,
    "sweep": {"variable": "doppler", "values": [40.0, 120.0]},
    "policies": [1, 4],
    "info_bits": "optimize"
  })");
  const ResultTable table = run(ExperimentConfig::from_json(doc), 2);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.columns.front() == "doppler");
  const int k_col = column_index(table, "K_ell1");
  CHECK(table.rows[0][k_col] >= 1.0);
}

TEST_CASE("pomdp experiments") {
  json doc = json::parse(R"({
    "kind": "pomdp_policy",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 1.0, "eps_good": 0.0,
              "memory": 0.3},
    "block_length": 24,
    "discount": 0.9,
    "grid_points": 300,
    "allow_reconfigure": true
  })");
  const ResultTable table = run(ExperimentConfig::from_json(doc), 1);
  REQUIRE(table.rows.size() == 300);
  CHECK(column_index(table, "psi1") == 0);
  CHECK(column_index(table, "rate") >= 0);
  CHECK(table.metadata.contains("thresholds"));
  CHECK(table.metadata.at("thresholds").at("monotone").get<bool>());

  json mean_doc = json::parse(R"({
    "kind": "pomdp_mean_value",
    "model": {"type": "gilbert_elliott", "p_bad": 0.2, "eps_bad": 1.0, "eps_good": 0.0},
    "block_length": 24,
    "discount": 0.9,
    "grid_points": 200,
    "sweep": {"variable": "memory", "values": [0.1, 0.8]}
  })");
  const ResultTable means = run(ExperimentConfig::from_json(mean_doc), 2);
  REQUIRE(means.rows.size() == 2);
  // the richer action set can only help, and pays off at high memory
  for (const auto& row : means.rows) CHECK(row[2] >= row[1] - 1e-6);
  CHECK(means.rows[1][2] - means.rows[1][1] > 0.1);
}

TEST_CASE("table serialization") {
  ResultTable table;
  table.columns = {"x", "wait", "hw_wait"};
  table.rows = {{1.0, 2.0, 0.25}, {2.0, 3.5, 0.5}};
  table.metadata = {{"config_hash", "0xabc"}, {"tool_version", "test"}};

  const std::string csv = table.to_csv();
  CHECK(csv.find("# config_hash=0xabc\n") != std::string::npos);
  CHECK(csv.find("x,wait,hw_wait\n") != std::string::npos);
  CHECK(csv.find("\n1,2,0.25\n") != std::string::npos);

  const json j = table.to_json();
  CHECK(j.at("columns").size() == 3);
  CHECK(j.at("rows").size() == 2);
  CHECK(j.at("metadata").at("config_hash") == "0xabc");

  convert_wait_columns_to_ms(table);
  CHECK(table.columns[1] == "wait_ms");
  CHECK(table.columns[2] == "hw_wait_ms");
  CHECK(table.rows[0][1] == doctest::Approx(2.0 * 4.615).epsilon(1e-12));
  CHECK(table.rows[0][0] == 1.0);  // non-wait columns untouched
}

TEST_CASE("presets are available and hash-stable") {
  const auto names = preset_names();
  CHECK(names.size() == 8);
  for (const auto& name : names) {
    const auto config = experiment_preset(name);
    CHECK_FALSE(config.raw.empty());
  }
  CHECK_THROWS_AS(experiment_preset("fig99"), ConfigError);

  // the fig3 preset carries the documented channel and reports a crossover
  const auto fig3 = experiment_preset("fig3");
  CHECK(fig3.block_length == 114);
  CHECK(fig3.with_crossover);
  CHECK(fig3.model_spec.at("eps_bad").get<double>() == 0.5);
}
