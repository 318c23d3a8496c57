#include "reload/cost_model.hpp"

#include "reload/error.hpp"
#include "reload/random.hpp"

#include <fmt/format.h>

#include <cmath>

namespace reload {

void CostModelConfig::validate() const {
	const double coefficients[] = {scan_cost_per_row, cpu_cost_per_row, hash_build_cost_per_row, nlj_cost_per_row_pair,
	                               merge_sort_cost_per_row_log_row};
	for (double c : coefficients) {
		if (!(c >= 0) || !std::isfinite(c)) {
			throw InvariantError("cost model coefficients must be finite and >= 0");
		}
	}
	if (!(latency_per_cost_unit > 0) || !std::isfinite(latency_per_cost_unit)) {
		throw InvariantError("latency_per_cost_unit must be > 0");
	}
	if (!(noise_rel_sigma >= 0) || !std::isfinite(noise_rel_sigma)) {
		throw InvariantError("noise_rel_sigma must be >= 0");
	}
}

CostModel::CostModel(const Query &query, const Catalog &catalog, CostModelConfig cfg) : query_(&query), cfg_(cfg) {
	cfg_.validate();
	for (const auto &name : query.relations()) {
		const auto &t = catalog.table(name);
		table_rows_.push_back(t.row_count);
		filtered_rows_.push_back(t.row_count * t.filter_selectivity);
		row_width_.push_back(t.row_width_bytes);
	}
	for (auto [i, j] : query.edge_indices()) {
		edges_.push_back(
		    {singleton(i) | singleton(j), catalog.selectivity(query.relations()[i], query.relations()[j])});
	}
}

double CostModel::cardinality(RelSet relations) const {
	if (relations == 0) {
		throw InvariantError("cardinality of an empty relation set");
	}
	if (relations & ~query_->all()) {
		throw InvariantError(fmt::format("relation set is not a subset of query '{}'", query_->id()));
	}
	double rows = 1.0;
	for (std::size_t i = 0; i < filtered_rows_.size(); ++i) {
		if (relations & singleton(i)) {
			rows *= filtered_rows_[i];
		}
	}
	for (const auto &e : edges_) {
		if ((relations & e.mask) == e.mask) {
			rows *= e.selectivity;
		}
	}
	return rows;
}

double CostModel::row_width(RelSet relations) const {
	double width = 0.0;
	for (std::size_t i = 0; i < row_width_.size(); ++i) {
		if (relations & singleton(i)) {
			width += row_width_[i];
		}
	}
	return width;
}

double CostModel::scan_cost(std::size_t relation) const {
	return cfg_.scan_cost_per_row * table_rows_.at(relation);
}

double CostModel::join_cost(JoinOperator op, double l, double r, double out) const {
	switch (op) {
	case JoinOperator::Hash:
		return cfg_.hash_build_cost_per_row * l + cfg_.cpu_cost_per_row * (l + r + out);
	case JoinOperator::NestedLoop:
		return cfg_.nlj_cost_per_row_pair * l * r;
	case JoinOperator::Merge:
		return cfg_.merge_sort_cost_per_row_log_row * (l * std::log2(1.0 + l) + r * std::log2(1.0 + r)) +
		       cfg_.cpu_cost_per_row * out;
	}
	return 0.0;
}

double CostModel::join_cost(JoinOperator op, RelSet left, RelSet right) const {
	return join_cost(op, cardinality(left), cardinality(right), cardinality(left | right));
}

double CostModel::cost(const PlanNode &plan) const {
	if (plan.is_scan()) {
		return scan_cost(plan.relation());
	}
	// children first, then the local term: the DP expert accumulates in the same order
	const double children = cost(*plan.left()) + cost(*plan.right());
	return children + join_cost(plan.op(), plan.left()->relations(), plan.right()->relations());
}

double CostModel::noiseless_latency(const PlanNode &plan) const {
	return cost(plan) * cfg_.latency_per_cost_unit;
}

double CostModel::execute(const PlanNode &plan, std::uint64_t seed) const {
	return apply_latency_noise(noiseless_latency(plan), cfg_.noise_rel_sigma, seed);
}

double apply_latency_noise(double noiseless_ms, double sigma, std::uint64_t rng_seed) {
	if (sigma == 0.0) {
		return noiseless_ms;
	}
	Rng rng(rng_seed);
	const double eps = std::normal_distribution<double>(0.0, sigma)(rng);
	return noiseless_ms * std::max(0.01, 1.0 + eps);
}

double estimate_cardinality(RelSet relations, const Query &query, const Catalog &catalog) {
	return CostModel(query, catalog).cardinality(relations);
}

double estimate_cardinality(const std::vector<std::string> &relations, const Query &query, const Catalog &catalog) {
	RelSet s = 0;
	for (const auto &name : relations) {
		auto idx = query.index_of(name);
		if (!idx) {
			throw InvariantError(fmt::format("relation '{}' is not part of query '{}'", name, query.id()));
		}
		s |= singleton(*idx);
	}
	return estimate_cardinality(s, query, catalog);
}

double plan_cost(const PlanNode &plan, const Query &query, const Catalog &catalog, const CostModelConfig &cfg) {
	if (plan.relations() != query.all()) {
		throw InvariantError(fmt::format("plan does not cover exactly the relations of query '{}'", query.id()));
	}
	return CostModel(query, catalog, cfg).cost(plan);
}

double execute(const PlanNode &plan, const Query &query, const Catalog &catalog, const CostModelConfig &cfg,
               std::uint64_t rng_seed) {
	return CostModel(query, catalog, cfg).execute(plan, rng_seed);
}

} // namespace reload
