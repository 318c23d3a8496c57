#include "reload/maml.hpp"

#include "reload/error.hpp"
#include "reload/random.hpp"

#include <algorithm>
#include <numeric>

namespace reload {

ModelParams maml_inner(const ModelParams &theta, std::span<const TrainBatch> batches, double alpha_inner,
                       std::size_t n_inner) {
	if (batches.empty()) {
		throw InvariantError("inner loop needs at least one batch");
	}
	ModelParams adapted = theta;
	for (std::size_t step = 0; step < n_inner; ++step) {
		const auto &batch = batches[step % batches.size()];
		adapted = sgd_step(adapted, batch_grad(adapted, batch), alpha_inner);
	}
	return adapted;
}

namespace {

TrainBatch take(const TrainBatch &pool, const std::vector<std::size_t> &order, std::size_t first, std::size_t count) {
	TrainBatch b;
	b.features.reserve(count);
	b.labels.reserve(count);
	for (std::size_t i = 0; i < count; ++i) {
		const auto idx = order[(first + i) % order.size()];
		b.features.push_back(pool.features[idx]);
		b.labels.push_back(pool.labels[idx]);
	}
	return b;
}

} // namespace

ModelParams maml_outer(const ModelParams &theta, const std::vector<TrainBatch> &tasks, const MamlConfig &cfg,
                       std::uint64_t rng_seed) {
	if (tasks.empty()) {
		throw InvariantError("meta-training needs at least one task");
	}
	for (const auto &t : tasks) {
		if (t.size() == 0) {
			throw InvariantError("meta-training task has no samples");
		}
	}
	Rng rng(rng_seed);
	ModelParams meta = theta;
	std::vector<std::size_t> order;
	for (std::size_t outer = 0; outer < cfg.n_outer; ++outer) {
		auto total = zeros_like(meta);
		for (const auto &pool : tasks) {
			const auto n = pool.size();
			order.resize(n);
			std::iota(order.begin(), order.end(), 0);
			std::shuffle(order.begin(), order.end(), rng);
			const auto s = cfg.support_size == 0 ? n : std::min(cfg.support_size, n);
			const auto q = cfg.query_size == 0 ? n : std::min(cfg.query_size, n);
			// query batch is taken from the back so it is disjoint from support when s + q <= n
			const auto support = take(pool, order, 0, s);
			const auto query = take(pool, order, n - q, q);
			const auto adapted = maml_inner(meta, std::span<const TrainBatch>(&support, 1), cfg.alpha_inner, cfg.n_inner);
			total = add_scaled(total, batch_grad(adapted, query), 1.0);
		}
		meta = sgd_step(meta, total, cfg.beta_outer);
	}
	return meta;
}

} // namespace reload
