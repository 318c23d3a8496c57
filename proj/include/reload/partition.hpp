#pragma once

#include "reload/catalog.hpp"
#include "reload/cost_model.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace reload {

//! Enumeration order is the tie-break order for policy selection.
enum class PartitioningPolicy { HalsteadComplexity = 0, OperatorCount = 1, EstimatedCost = 2, EstimatedRows = 3 };

inline constexpr std::array<PartitioningPolicy, 4> kPartitioningPolicies = {
    PartitioningPolicy::HalsteadComplexity, PartitioningPolicy::OperatorCount, PartitioningPolicy::EstimatedCost,
    PartitioningPolicy::EstimatedRows};

const char *to_string(PartitioningPolicy policy);
//! Accepts halstead | operators | cost | rows.
PartitioningPolicy parse_partitioning(std::string_view name);

//! (eta1 / 2) × (N / eta2) × log2(eta1 + eta2), with N the operand occurrences and
//! eta1 / eta2 the distinct operators / operands.
double halstead_complexity(const Query &query);

double policy_score(const Query &query, PartitioningPolicy policy, const Catalog &catalog,
                    const CostModelConfig &cfg);

struct TaskSet {
	PartitioningPolicy policy = PartitioningPolicy::HalsteadComplexity;
	//! Query ids per task.
	std::vector<std::vector<std::string>> tasks;
	double dbi_score = 0;
};

//! Sorts by score ascending (ties by id) and cuts into k_tasks chunks of floor(|W| / k_tasks);
//! the remainder joins the last task.
TaskSet partition_workload(const std::vector<Query> &workload, PartitioningPolicy policy, std::size_t k_tasks,
                           const Catalog &catalog, const CostModelConfig &cfg);
//! Same as above with precomputed scores (one per query, workload order).
TaskSet partition_by_scores(const std::vector<Query> &workload, const std::vector<double> &scores,
                            PartitioningPolicy policy, std::size_t k_tasks);

using Embedding = std::vector<double>;

//! z-scored (halstead, operator count, log1p cost, log1p rows) per query id. Features with
//! zero spread map to 0.
std::map<std::string, Embedding> query_embeddings(const std::vector<Query> &workload, const Catalog &catalog,
                                                  const CostModelConfig &cfg);

inline constexpr double kDbiEpsilon = 1e-9;

//! Davies-Bouldin index of the tasks over the embeddings; lower is better.
double davies_bouldin(const std::vector<std::vector<std::string>> &tasks,
                      const std::map<std::string, Embedding> &embeddings);

struct PartitionReport {
	//! One entry per policy, enumeration order, dbi_score filled.
	std::vector<TaskSet> candidates;
	std::size_t selected = 0;

	const TaskSet &best() const {
		return candidates.at(selected);
	}
};

//! Scores all four policies and keeps the lowest-DBI partition (first policy on ties).
PartitionReport partition_report(const std::vector<Query> &workload, std::size_t k_tasks, const Catalog &catalog,
                                 const CostModelConfig &cfg);
TaskSet select_partitioning(const std::vector<Query> &workload, std::size_t k_tasks, const Catalog &catalog,
                            const CostModelConfig &cfg);

} // namespace reload
