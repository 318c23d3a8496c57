#pragma once

#include "reload/value_model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace reload {

struct MamlConfig {
	double alpha_inner = 1e-3;
	double beta_outer = 1e-3;
	std::size_t n_inner = 5;
	std::size_t n_outer = 150;
	//! Samples drawn per task and outer iteration; 0 takes the whole pool.
	std::size_t support_size = 64;
	std::size_t query_size = 64;
};

//! n_inner successive SGD steps from theta; step i trains on batches[i % batches.size()].
//! n_inner = 0 returns theta.
ModelParams maml_inner(const ModelParams &theta, std::span<const TrainBatch> batches, double alpha_inner,
                       std::size_t n_inner);

//! First-order MAML. Each task is a pool of labelled samples; per outer iteration every
//! task draws a support and a query batch, adapts on the support batch, and contributes
//! the query-batch gradient at the adapted parameters. The summed gradient is applied
//! to theta with step beta_outer.
ModelParams maml_outer(const ModelParams &theta, const std::vector<TrainBatch> &tasks, const MamlConfig &cfg,
                       std::uint64_t rng_seed);

} // namespace reload
