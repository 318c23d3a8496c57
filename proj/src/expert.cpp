#include "reload/expert.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace reload {

namespace {

struct DpEntry {
	double cost = std::numeric_limits<double>::infinity();
	RelSet left = 0;
	JoinOperator op = JoinOperator::Hash;
	bool valid = false;
};

PlanPtr build(const std::vector<DpEntry> &table, RelSet s) {
	if (popcount(s) == 1) {
		return PlanNode::scan(static_cast<std::size_t>(__builtin_ctzll(s)));
	}
	const auto &e = table[s];
	return PlanNode::join(build(table, e.left), build(table, s ^ e.left), e.op);
}

} // namespace

PlanPtr expert_plan(const Query &query, const Catalog &catalog, const CostModelConfig &cfg, std::size_t dp_limit) {
	const auto n = query.size();
	if (n > dp_limit) {
		throw InvariantError(fmt::format("query '{}' has {} relations, above the DP limit of {}", query.id(), n, dp_limit));
	}
	CostModel model(query, catalog, cfg);
	std::vector<DpEntry> table(std::size_t {1} << n);
	std::vector<double> card(table.size(), 0.0);
	for (std::size_t i = 0; i < n; ++i) {
		auto &e = table[singleton(i)];
		e.cost = model.scan_cost(i);
		e.valid = true;
	}
	for (RelSet s = 1; s < table.size(); ++s) {
		if (query.is_connected(s)) {
			card[s] = model.cardinality(s);
		}
	}
	for (RelSet s = 1; s < table.size(); ++s) {
		if (popcount(s) < 2 || card[s] == 0.0 || !query.is_connected(s)) {
			continue;
		}
		auto &best = table[s];
		// ascending submask enumeration keeps the lexicographic tie-break
		for (RelSet left = (0 - s) & s; left != s; left = (left - s) & s) {
			const RelSet right = s ^ left;
			const auto &l = table[left];
			const auto &r = table[right];
			if (!l.valid || !r.valid || !query.connects(left, right)) {
				continue;
			}
			const double children = l.cost + r.cost;
			for (auto op : kJoinOperators) {
				const double total = children + model.join_cost(op, card[left], card[right], card[s]);
				if (total < best.cost) {
					best.cost = total;
					best.left = left;
					best.op = op;
					best.valid = true;
				}
			}
		}
	}
	const RelSet all = query.all();
	if (!table[all].valid) {
		throw InvariantError(fmt::format("no cross-product-free plan exists for query '{}'", query.id()));
	}
	return build(table, all);
}

ExpertBaseline expert_baseline(const Query &query, const Catalog &catalog, const CostModelConfig &cfg,
                               std::size_t n_runs, std::uint64_t base_seed) {
	if (n_runs < 2) {
		throw InvariantError("expert baseline needs at least 2 runs");
	}
	const auto plan = expert_plan(query, catalog, cfg);
	CostModel model(query, catalog, cfg);
	std::vector<double> runs;
	runs.reserve(n_runs);
	double sum = 0.0;
	for (std::size_t i = 0; i < n_runs; ++i) {
		runs.push_back(model.execute(*plan, base_seed + i));
		sum += runs.back();
	}
	ExpertBaseline b;
	b.query_id = query.id();
	b.n_runs = n_runs;
	b.mean_latency_ms = sum / static_cast<double>(n_runs);
	if (std::all_of(runs.begin(), runs.end(), [&](double x) { return x == runs.front(); })) {
		b.mean_latency_ms = runs.front();
	}
	double ss = 0.0;
	for (double x : runs) {
		ss += (x - b.mean_latency_ms) * (x - b.mean_latency_ms);
	}
	b.std_latency_ms = std::sqrt(ss / static_cast<double>(n_runs - 1));
	b.tolerance_ms = 2.0 * b.std_latency_ms;
	b.noiseless_latency_ms = model.noiseless_latency(*plan);
	return b;
}

} // namespace reload
