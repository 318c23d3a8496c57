#include "reload/config.hpp"
#include "reload/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace reload;
using nlohmann::json;

TEST_CASE("an empty document keeps every default") {
	const auto cfg = parse_run_config(json::object());
	const RunConfig defaults;
	CHECK(cfg.hidden_layers == std::vector<std::size_t> {64, 64});
	CHECK(cfg.learning_rate == 1e-3);
	CHECK(cfg.retention.policy.kind == WeightingPolicy::Kind::Hybrid);
	CHECK(cfg.retention.policy.beta_mix == 0.5);
	CHECK(cfg.retention.k_replay == 256);
	CHECK(cfg.transfer.k_tasks == 4);
	CHECK_FALSE(cfg.transfer.policy.has_value());
	CHECK(cfg.search.beam_width == 8);
	CHECK(cfg.search.shape == PlanShape::Bushy);
	CHECK(cfg.iterations == 200);
	CHECK(cfg.eval_interval == 5);
	CHECK(to_json(cfg) == to_json(defaults));
}

TEST_CASE("fields are read from nested sections") {
	const auto doc = json::parse(R"({
	  "cost_model": {"noise_rel_sigma": 0.0},
	  "model": {"hidden_layers": [16], "train_passes": 3},
	  "retention": {"enabled": false, "weighting": "td-high"},
	  "transfer": {"policy": "rows", "n_outer": 7},
	  "search": {"left_deep": true, "epsilon": 0.25},
	  "iterations": 40, "seed": 9
	})");
	const auto cfg = parse_run_config(doc, "/base");
	CHECK(cfg.cost.noise_rel_sigma == 0);
	CHECK(cfg.hidden_layers == std::vector<std::size_t> {16});
	CHECK(cfg.train_passes == 3);
	CHECK_FALSE(cfg.retention.enabled);
	CHECK(cfg.retention.policy.kind == WeightingPolicy::Kind::TDErrorHigh);
	CHECK(cfg.transfer.policy == std::optional(PartitioningPolicy::EstimatedRows));
	CHECK(cfg.transfer.maml.n_outer == 7);
	CHECK(cfg.search.shape == PlanShape::LeftDeep);
	CHECK(cfg.search.epsilon == 0.25);
	CHECK(cfg.iterations == 40);
	CHECK(cfg.seed == 9);
}

TEST_CASE("serialization round-trips") {
	auto doc = json::parse(R"({"catalog": "/x/c.json", "train_workload": "/x/t.json", "test_workload": "/x/u.json",
	  "transfer": {"policy": "halstead"}, "retention": {"weighting": "recency"}, "search": {"left_deep": true}})");
	const auto cfg = parse_run_config(doc);
	const auto again = parse_run_config(json::parse(to_json(cfg).dump()));
	CHECK(to_json(again) == to_json(cfg));
	CHECK(again.catalog == std::filesystem::path("/x/c.json"));
}

TEST_CASE("invalid documents are rejected") {
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"iteration": 5})")), ParseError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"lr": 5}})")), ParseError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"iterations": "many"})")), ParseError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": []})")), ParseError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"search": {"epsilon": 1.5}})")), InvariantError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"learning_rate": 0}})")), InvariantError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"transfer": {"k_tasks": 1}})")), InvariantError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"expert_runs": 1})")), InvariantError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"retention": {"weighting": "oldest"}})")), InvariantError);
	CHECK_THROWS_AS(parse_run_config(json::parse(R"({"cost_model": {"cpu_cost_per_row": -1}})")), InvariantError);
}

TEST_CASE("files resolve relative paths against their directory") {
	const auto dir = testing::scratch_dir("config");
	{
		std::ofstream os(dir / "run.json");
		os << R"({"catalog": "c.json", "train_workload": "/abs/t.json", "iterations": 3})";
	}
	const auto cfg = load_run_config(dir / "run.json");
	CHECK(cfg.catalog == dir / "c.json");
	CHECK(cfg.train_workload == std::filesystem::path("/abs/t.json"));
	CHECK(cfg.iterations == 3);

	{
		std::ofstream os(dir / "bad.json");
		os << R"({"search": {"beam_width": 0}})";
	}
	try {
		load_run_config(dir / "bad.json");
		FAIL("expected an error");
	} catch (const InvariantError &e) {
		CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
		CHECK(std::string(e.what()).find("beam_width") != std::string::npos);
	}
	CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ParseError);
}

TEST_CASE("bundled configuration spells out the defaults") {
	const auto cfg = load_run_config(testing::data_dir() / "config.json");
	auto expected = RunConfig {};
	expected.catalog = cfg.catalog;
	expected.train_workload = cfg.train_workload;
	expected.test_workload = cfg.test_workload;
	CHECK(to_json(cfg) == to_json(expected));
	CHECK(std::filesystem::exists(cfg.catalog));
}
