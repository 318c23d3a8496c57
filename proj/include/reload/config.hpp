#pragma once

#include "reload/cost_model.hpp"
#include "reload/maml.hpp"
#include "reload/partition.hpp"
#include "reload/plan.hpp"
#include "reload/replay.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace reload {

struct RetentionConfig {
	//! When false, each iteration trains only on the experiences it just produced.
	bool enabled = true;
	WeightingPolicy policy = WeightingPolicy::hybrid(0.5);
	double alpha_td = 1.0;
	double gamma = 1.0;
	std::size_t k_replay = 256;
	std::size_t capacity = 20000;
};

struct TransferConfig {
	bool enabled = true;
	std::size_t k_tasks = 4;
	//! Skips policy selection and partitions with this policy.
	std::optional<PartitioningPolicy> policy;
	MamlConfig maml;
	//! Random plans executed per query, next to the expert plan, to build meta-training data.
	std::size_t rollouts_per_query = 4;
};

struct SearchConfig {
	std::size_t beam_width = 8;
	double epsilon = 0.5;
	double epsilon_decay = 0.95;
	PlanShape shape = PlanShape::Bushy;
};

struct RunConfig {
	std::filesystem::path catalog;
	std::filesystem::path train_workload;
	std::filesystem::path test_workload;

	CostModelConfig cost;
	std::vector<std::size_t> hidden_layers = {64, 64};
	double learning_rate = 1e-3;
	std::size_t minibatch = 64;
	//! Passes over each iteration's training sample.
	std::size_t train_passes = 1;

	RetentionConfig retention;
	TransferConfig transfer;
	SearchConfig search;

	std::size_t iterations = 200;
	std::size_t eval_interval = 5;
	std::uint64_t seed = 0;
	std::size_t repetitions = 6;
	std::size_t expert_runs = 10;
	double rebound_window = 0.1;
	std::size_t convergence_sustain = 3;
	std::size_t dp_limit = 12;

	//! Throws InvariantError describing the first invalid field.
	void validate() const;
};

//! Reads a run configuration document. Relative paths resolve against the file's
//! directory; missing keys keep their defaults, unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path &path);
RunConfig parse_run_config(const nlohmann::json &doc, const std::filesystem::path &base_dir = {});
nlohmann::ordered_json to_json(const RunConfig &cfg);

} // namespace reload
