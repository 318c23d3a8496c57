#include "reload/features.hpp"

#include "reload/error.hpp"

#include <cmath>

namespace reload {

FeatureVector Featurizer::featurize(const PlanNode &subplan, const CostModel &model, double recency) const {
	const auto t = catalog_->size();
	FeatureVector f(dimension(), 0.0);
	const auto &query = model.query();
	const RelSet rels = subplan.relations();
	for (std::size_t i = 0; i < query.size(); ++i) {
		if (rels & singleton(i)) {
			auto idx = catalog_->find(query.relations()[i]);
			if (!idx) {
				throw InvariantError("subplan references a table missing from the catalog");
			}
			f[*idx] = 1.0;
		}
	}
	for (std::size_t k = 0; k < 3; ++k) {
		f[t + k] = subplan.operator_counts()[k];
	}
	const double rows = model.cardinality(rels);
	f[t + 3] = std::log1p(rows);
	f[t + 4] = std::log1p(rows * model.row_width(rels));
	f[t + 5] = std::log1p(model.cost(subplan));
	f[t + 6] = subplan.depth();
	f[t + 7] = recency;
	return f;
}

void set_recency(FeatureVector &feature, double recency) {
	if (feature.empty()) {
		throw InvariantError("empty feature vector");
	}
	feature.back() = recency;
}

} // namespace reload
