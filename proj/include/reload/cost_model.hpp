#pragma once

#include "reload/catalog.hpp"
#include "reload/plan.hpp"

#include <cstdint>
#include <vector>

namespace reload {

//! Coefficients of the simulated DBMS. Costs are in abstract units; latency_per_cost_unit
//! converts them to milliseconds.
struct CostModelConfig {
	double scan_cost_per_row = 0.1;
	double cpu_cost_per_row = 0.2;
	double hash_build_cost_per_row = 0.3;
	double nlj_cost_per_row_pair = 0.001;
	double merge_sort_cost_per_row_log_row = 0.05;
	double latency_per_cost_unit = 0.001;
	double noise_rel_sigma = 0.05;

	//! Throws InvariantError on negative coefficients or non-positive latency_per_cost_unit.
	void validate() const;
};

//! Cost model bound to one query: precomputes per-relation statistics so cardinality
//! and cost evaluation avoid name lookups.
class CostModel {
public:
	CostModel(const Query &query, const Catalog &catalog, CostModelConfig cfg = {});

	const Query &query() const {
		return *query_;
	}
	const CostModelConfig &config() const {
		return cfg_;
	}

	//! Independence model: product of filtered base rows times the selectivities of the
	//! join edges internal to the set. A pure function of the set.
	double cardinality(RelSet relations) const;
	//! Sum of the row widths of the relations (bytes per output row).
	double row_width(RelSet relations) const;
	double scan_cost(std::size_t relation) const;
	double join_cost(JoinOperator op, double left_rows, double right_rows, double out_rows) const;
	//! Local cost of one join node given the relation sets of its inputs.
	double join_cost(JoinOperator op, RelSet left, RelSet right) const;
	double cost(const PlanNode &plan) const;
	//! Latency with no noise: cost × latency_per_cost_unit.
	double noiseless_latency(const PlanNode &plan) const;
	//! Noisy latency, deterministic for a given seed.
	double execute(const PlanNode &plan, std::uint64_t seed) const;

private:
	const Query *query_;
	CostModelConfig cfg_;
	std::vector<double> table_rows_;
	std::vector<double> filtered_rows_;
	std::vector<double> row_width_;
	struct Edge {
		RelSet mask;
		double selectivity;
	};
	std::vector<Edge> edges_;
};

double estimate_cardinality(RelSet relations, const Query &query, const Catalog &catalog);
//! Name-based convenience overload; throws if a name is not part of the query or the set is empty.
double estimate_cardinality(const std::vector<std::string> &relations, const Query &query, const Catalog &catalog);
double plan_cost(const PlanNode &plan, const Query &query, const Catalog &catalog, const CostModelConfig &cfg);
double execute(const PlanNode &plan, const Query &query, const Catalog &catalog, const CostModelConfig &cfg,
               std::uint64_t rng_seed);

//! Multiplies a noiseless latency by max(0.01, 1 + ε), ε ~ Normal(0, sigma) seeded by rng_seed.
double apply_latency_noise(double noiseless_ms, double sigma, std::uint64_t rng_seed);

} // namespace reload
