#pragma once

#include "reload/cost_model.hpp"
#include "reload/plan.hpp"

#include <cstdint>
#include <string>

namespace reload {

inline constexpr std::size_t kDefaultDpLimit = 12;

//! Exhaustive bushy DP over connected relation subsets (no cross products).
//! Ties go to the numerically smallest left relation set, then Hash < Merge < NestedLoop.
//! Throws InvariantError when the query has more than dp_limit relations.
PlanPtr expert_plan(const Query &query, const Catalog &catalog, const CostModelConfig &cfg,
                    std::size_t dp_limit = kDefaultDpLimit);

//! Latency statistics of the expert plan across repeated noisy executions.
struct ExpertBaseline {
	std::string query_id;
	double mean_latency_ms = 0;
	//! Sample standard deviation (n - 1 denominator).
	double std_latency_ms = 0;
	double tolerance_ms = 0;
	std::size_t n_runs = 0;
	//! Cost-model latency of the expert plan without noise.
	double noiseless_latency_ms = 0;

	//! Upper edge of the tolerance band; latencies above it are inferior.
	double upper_band() const {
		return mean_latency_ms + tolerance_ms;
	}
};

//! Executes the expert plan n_runs times with seeds base_seed + i.
ExpertBaseline expert_baseline(const Query &query, const Catalog &catalog, const CostModelConfig &cfg,
                               std::size_t n_runs = 10, std::uint64_t base_seed = 0);

} // namespace reload
