#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace reload {

using FeatureVector = std::vector<double>;

//! One dense layer; weights are row-major [out][in].
struct DenseLayer {
	std::size_t in = 0;
	std::size_t out = 0;
	std::vector<double> weights;
	std::vector<double> biases;

	bool operator==(const DenseLayer &) const = default;
};

//! Parameters of a feed-forward regressor with rectifier hidden layers and a linear
//! scalar output. Gradients use the same type.
struct ModelParams {
	std::vector<std::size_t> layer_sizes;
	std::vector<DenseLayer> layers;

	std::size_t input_dim() const {
		return layer_sizes.empty() ? 0 : layer_sizes.front();
	}
	std::size_t parameter_count() const;
	bool same_shape(const ModelParams &other) const;

	bool operator==(const ModelParams &) const = default;
};

//! Regression targets are kept in label space (see to_label).
struct TrainBatch {
	std::vector<FeatureVector> features;
	std::vector<double> labels;

	std::size_t size() const {
		return labels.size();
	}
};

//! Latencies span orders of magnitude; the model regresses log1p(ms).
double to_label(double latency_ms);
double from_label(double label);

//! Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0. Throws unless the output size is 1.
ModelParams init_params(const std::vector<std::size_t> &layer_sizes, std::uint64_t rng_seed);
ModelParams zeros_like(const ModelParams &params);

//! Forward pass; result is in label space.
double predict(const ModelParams &params, std::span<const double> feature);
//! predict() mapped back to milliseconds.
double predict_latency_ms(const ModelParams &params, std::span<const double> feature);

//! Mean squared error over the batch.
double batch_loss(const ModelParams &params, const TrainBatch &batch);
//! Analytic gradient of batch_loss by backpropagation.
ModelParams batch_grad(const ModelParams &params, const TrainBatch &batch);
//! params - lr * grad; throws on shape mismatch.
ModelParams sgd_step(const ModelParams &params, const ModelParams &grad, double lr);

//! a + scale * b, element-wise.
ModelParams add_scaled(const ModelParams &a, const ModelParams &b, double scale);

std::vector<double> flatten(const ModelParams &params);
//! Inverse of flatten for the given shape.
ModelParams unflatten(const ModelParams &shape, std::span<const double> values);

//! Text checkpoint; doubles are written as hex floats so load(save(p)) == p exactly.
void save_checkpoint(const ModelParams &params, const std::filesystem::path &path);
ModelParams load_checkpoint(const std::filesystem::path &path);

} // namespace reload
