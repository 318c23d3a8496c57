#include "reload/partition.hpp"

#include "reload/error.hpp"
#include "reload/expert.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace reload {

const char *to_string(PartitioningPolicy policy) {
	switch (policy) {
	case PartitioningPolicy::HalsteadComplexity:
		return "halstead";
	case PartitioningPolicy::OperatorCount:
		return "operators";
	case PartitioningPolicy::EstimatedCost:
		return "cost";
	case PartitioningPolicy::EstimatedRows:
		return "rows";
	}
	return "?";
}

PartitioningPolicy parse_partitioning(std::string_view name) {
	for (auto p : kPartitioningPolicies) {
		if (name == to_string(p)) {
			return p;
		}
	}
	throw InvariantError(fmt::format("unknown partitioning policy '{}'", name));
}

double halstead_complexity(const Query &query) {
	if (query.operand_tokens().empty() || query.operator_tokens().empty()) {
		throw InvariantError(fmt::format("query '{}': Halstead complexity needs operators and operands", query.id()));
	}
	const std::set<std::string> operators(query.operator_tokens().begin(), query.operator_tokens().end());
	const std::set<std::string> operands(query.operand_tokens().begin(), query.operand_tokens().end());
	const double eta1 = static_cast<double>(operators.size());
	const double eta2 = static_cast<double>(operands.size());
	const double n = static_cast<double>(query.operand_tokens().size());
	return (eta1 / 2.0) * (n / eta2) * std::log2(eta1 + eta2);
}

double policy_score(const Query &query, PartitioningPolicy policy, const Catalog &catalog,
                    const CostModelConfig &cfg) {
	switch (policy) {
	case PartitioningPolicy::HalsteadComplexity:
		return halstead_complexity(query);
	case PartitioningPolicy::OperatorCount:
		return static_cast<double>(query.operator_tokens().size());
	case PartitioningPolicy::EstimatedCost:
		return plan_cost(*expert_plan(query, catalog, cfg), query, catalog, cfg);
	case PartitioningPolicy::EstimatedRows:
		return CostModel(query, catalog, cfg).cardinality(query.all());
	}
	return 0.0;
}

TaskSet partition_by_scores(const std::vector<Query> &workload, const std::vector<double> &scores,
                            PartitioningPolicy policy, std::size_t k_tasks) {
	if (k_tasks < 2) {
		throw InvariantError("k_tasks must be at least 2");
	}
	if (k_tasks > workload.size()) {
		throw InvariantError(fmt::format("k_tasks = {} exceeds the workload size {}", k_tasks, workload.size()));
	}
	if (scores.size() != workload.size()) {
		throw InvariantError("one score per query is required");
	}
	std::vector<std::size_t> order(workload.size());
	std::iota(order.begin(), order.end(), 0);
	std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		if (scores[a] != scores[b]) {
			return scores[a] < scores[b];
		}
		return workload[a].id() < workload[b].id();
	});
	const std::size_t size = workload.size() / k_tasks;
	TaskSet out;
	out.policy = policy;
	out.tasks.resize(k_tasks);
	for (std::size_t pos = 0; pos < order.size(); ++pos) {
		const auto task = std::min(pos / size, k_tasks - 1);
		out.tasks[task].push_back(workload[order[pos]].id());
	}
	return out;
}

TaskSet partition_workload(const std::vector<Query> &workload, PartitioningPolicy policy, std::size_t k_tasks,
                           const Catalog &catalog, const CostModelConfig &cfg) {
	std::vector<double> scores;
	scores.reserve(workload.size());
	for (const auto &q : workload) {
		scores.push_back(policy_score(q, policy, catalog, cfg));
	}
	return partition_by_scores(workload, scores, policy, k_tasks);
}

namespace {

using ScoreTable = std::array<std::vector<double>, 4>;

ScoreTable score_table(const std::vector<Query> &workload, const Catalog &catalog, const CostModelConfig &cfg) {
	ScoreTable t;
	for (auto p : kPartitioningPolicies) {
		auto &col = t[static_cast<std::size_t>(p)];
		for (const auto &q : workload) {
			col.push_back(policy_score(q, p, catalog, cfg));
		}
	}
	return t;
}

std::map<std::string, Embedding> embeddings_from(const std::vector<Query> &workload, const ScoreTable &scores) {
	const auto n = workload.size();
	std::array<std::vector<double>, 4> cols;
	cols[0] = scores[0];
	cols[1] = scores[1];
	for (std::size_t i = 0; i < n; ++i) {
		cols[2].push_back(std::log1p(scores[2][i]));
		cols[3].push_back(std::log1p(scores[3][i]));
	}
	for (auto &col : cols) {
		const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
		double var = 0.0;
		for (double x : col) {
			var += (x - mean) * (x - mean);
		}
		const double sd = std::sqrt(var / static_cast<double>(n));
		for (double &x : col) {
			x = sd > 0.0 ? (x - mean) / sd : 0.0;
		}
	}
	std::map<std::string, Embedding> out;
	for (std::size_t i = 0; i < n; ++i) {
		out[workload[i].id()] = {cols[0][i], cols[1][i], cols[2][i], cols[3][i]};
	}
	return out;
}

double distance(const Embedding &a, const Embedding &b) {
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		s += (a[i] - b[i]) * (a[i] - b[i]);
	}
	return std::sqrt(s);
}

} // namespace

std::map<std::string, Embedding> query_embeddings(const std::vector<Query> &workload, const Catalog &catalog,
                                                  const CostModelConfig &cfg) {
	if (workload.empty()) {
		throw InvariantError("cannot embed an empty workload");
	}
	return embeddings_from(workload, score_table(workload, catalog, cfg));
}

double davies_bouldin(const std::vector<std::vector<std::string>> &tasks,
                      const std::map<std::string, Embedding> &embeddings) {
	const auto k = tasks.size();
	if (k < 2) {
		throw InvariantError("Davies-Bouldin index needs at least 2 tasks");
	}
	std::vector<Embedding> centroids(k);
	std::vector<double> spread(k, 0.0);
	for (std::size_t i = 0; i < k; ++i) {
		if (tasks[i].empty()) {
			throw InvariantError(fmt::format("task {} is empty", i));
		}
		std::vector<const Embedding *> points;
		for (const auto &id : tasks[i]) {
			auto it = embeddings.find(id);
			if (it == embeddings.end()) {
				throw InvariantError(fmt::format("no embedding for query '{}'", id));
			}
			points.push_back(&it->second);
		}
		auto &c = centroids[i];
		c.assign(points.front()->size(), 0.0);
		for (const auto *p : points) {
			for (std::size_t d = 0; d < c.size(); ++d) {
				c[d] += (*p)[d];
			}
		}
		for (double &x : c) {
			x /= static_cast<double>(points.size());
		}
		for (const auto *p : points) {
			spread[i] += distance(*p, c);
		}
		spread[i] /= static_cast<double>(points.size());
	}
	double total = 0.0;
	for (std::size_t i = 0; i < k; ++i) {
		double worst = 0.0;
		for (std::size_t j = 0; j < k; ++j) {
			if (i == j) {
				continue;
			}
			const double d = std::max(kDbiEpsilon, distance(centroids[i], centroids[j]));
			worst = std::max(worst, (spread[i] + spread[j]) / d);
		}
		total += worst;
	}
	return total / static_cast<double>(k);
}

PartitionReport partition_report(const std::vector<Query> &workload, std::size_t k_tasks, const Catalog &catalog,
                                 const CostModelConfig &cfg) {
	if (k_tasks < 2 || k_tasks > workload.size()) {
		throw InvariantError(fmt::format("k_tasks = {} must lie in [2, {}]", k_tasks, workload.size()));
	}
	const auto scores = score_table(workload, catalog, cfg);
	const auto embeddings = embeddings_from(workload, scores);
	PartitionReport report;
	double best = std::numeric_limits<double>::infinity();
	for (auto p : kPartitioningPolicies) {
		auto ts = partition_by_scores(workload, scores[static_cast<std::size_t>(p)], p, k_tasks);
		ts.dbi_score = davies_bouldin(ts.tasks, embeddings);
		if (ts.dbi_score < best) {
			best = ts.dbi_score;
			report.selected = report.candidates.size();
		}
		report.candidates.push_back(std::move(ts));
	}
	return report;
}

TaskSet select_partitioning(const std::vector<Query> &workload, std::size_t k_tasks, const Catalog &catalog,
                            const CostModelConfig &cfg) {
	return partition_report(workload, k_tasks, catalog, cfg).best();
}

} // namespace reload
