#pragma once

#include "reload/catalog.hpp"
#include "reload/cost_model.hpp"
#include "reload/plan.hpp"
#include "reload/value_model.hpp"

namespace reload {

//! Fixed-length subplan encoding for one catalog:
//!
//!   [0, T)   multi-hot catalog tables in the subplan
//!   T..T+2   join operator counts (Hash, Merge, NestedLoop)
//!   T+3      log1p(estimated rows)
//!   T+4      log1p(estimated data volume = rows × row width)
//!   T+5      log1p(estimated cost)
//!   T+6      depth of the subplan
//!   T+7      recency slot
class Featurizer {
public:
	explicit Featurizer(const Catalog &catalog) : catalog_(&catalog) {
	}

	std::size_t dimension() const {
		return catalog_->size() + 8;
	}
	std::size_t recency_slot() const {
		return dimension() - 1;
	}

	FeatureVector featurize(const PlanNode &subplan, const CostModel &model, double recency = 0.0) const;

private:
	const Catalog *catalog_;
};

void set_recency(FeatureVector &feature, double recency);

} // namespace reload
