#pragma once

#include "reload/catalog.hpp"
#include "reload/config.hpp"
#include "reload/cost_model.hpp"
#include "reload/expert.hpp"
#include "reload/features.hpp"
#include "reload/metrics.hpp"
#include "reload/partition.hpp"
#include "reload/replay.hpp"
#include "reload/value_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reload {

//! Beam search over partial plans scored by the value model.
//!
//! A state's score is the largest predicted latency among its join fragments (lower is
//! better). At each step, with probability epsilon, the beam collapses to one uniformly
//! drawn legal successor of its best state. Deterministic for a given seed.
PlanPtr plan_search(const CostModel &cost_model, const Featurizer &featurizer, const ModelParams &model,
                    std::size_t beam_width, double epsilon, std::uint64_t rng_seed,
                    PlanShape shape = PlanShape::Bushy);

//! Catalog, workloads, and per-query expert baselines of one run.
struct Workspace {
	Catalog catalog;
	std::vector<Query> train;
	std::vector<Query> test;
};

Workspace load_workspace(const RunConfig &cfg);

struct IterationRecord {
	std::uint64_t iteration = 0;
	//! Noisy latencies of the greedy plans, workload order.
	std::vector<double> train_latency;
	std::vector<double> test_latency;
	double wrl_train = 0;
	double wrl_test = 0;
	std::size_t buffer_size = 0;
	//! Mean normalized TD error / recency of the replay sample that preceded this record.
	double mean_td_norm = 0;
	double mean_recency = 0;
	double epsilon = 0;
	double wall_ms = 0;

	double train_total() const;
	double test_total() const;
};

struct QueryVerdict {
	std::string query_id;
	bool test = false;
	RobustnessVerdict verdict;
	double final_latency_ms = 0;
};

struct RunSummary {
	std::uint64_t seed = 0;
	std::vector<QueryVerdict> verdicts;
	std::size_t plateau = 0;
	std::size_t rebound = 0;
	std::optional<std::uint64_t> convergence;
	double final_wrl_train = 0;
	double final_wrl_test = 0;
	//! Greedy plans whose noiseless latency fell below the expert's; always 0 for a correct DP.
	std::size_t expert_bound_violations = 0;

	std::size_t regressions() const {
		return plateau + rebound;
	}
};

struct TrainingResult {
	std::vector<IterationRecord> records;
	ModelParams model;
	std::vector<ExpertBaseline> train_baselines;
	std::vector<ExpertBaseline> test_baselines;
	std::optional<PartitionReport> partition;
	RunSummary summary;
	//! Replay buffer at the end of training; empty when retention is disabled.
	std::optional<ReplayBuffer> buffer;
};

//! Meta-trained initial parameters over the partitioned training workload.
struct MetaInit {
	ModelParams params;
	PartitionReport partition;
};

MetaInit meta_train(const RunConfig &cfg, const Workspace &ws);

struct ExpertBaselines {
	std::vector<ExpertBaseline> train;
	std::vector<ExpertBaseline> test;
};

//! Expert baselines of every workload query; seeded from cfg.seed.
ExpertBaselines compute_baselines(const RunConfig &cfg, const Workspace &ws);

struct Evaluation {
	//! Latencies, WRL, and epsilon 0; the replay fields are left for the caller.
	IterationRecord record;
	std::size_t expert_bound_violations = 0;
};

//! Greedy (epsilon 0) planning and noisy execution of every train and test query.
Evaluation evaluate_model(const RunConfig &cfg, const Workspace &ws, const ModelParams &model,
                          const ExpertBaselines &baselines, std::uint64_t iteration);

TrainingResult run_training(const RunConfig &cfg);
TrainingResult run_training(const RunConfig &cfg, const Workspace &ws);

//! Verdicts, convergence, and final WRL from a run's records.
RunSummary summarize(const RunConfig &cfg, const Workspace &ws, const std::vector<IterationRecord> &records,
                     const std::vector<ExpertBaseline> &train_baselines,
                     const std::vector<ExpertBaseline> &test_baselines);

double median(std::vector<double> values);

struct RepetitionReport {
	std::vector<TrainingResult> runs;
	//! Median across runs per evaluation index.
	std::vector<double> median_wrl_train;
	std::vector<double> median_wrl_test;
	//! +inf stands for no convergence.
	double median_convergence = 0;
	double median_regressions = 0;
	double median_plateau = 0;
	double median_rebound = 0;
	std::size_t no_convergence_runs = 0;
};

//! Runs seeds cfg.seed .. cfg.seed + n_reps - 1.
RepetitionReport run_repetitions(const RunConfig &cfg, std::size_t n_reps);
RepetitionReport run_repetitions(const RunConfig &cfg, const Workspace &ws, std::size_t n_reps);

} // namespace reload
