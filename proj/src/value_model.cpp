#include "reload/value_model.hpp"

#include "reload/error.hpp"
#include "reload/random.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace reload {

std::size_t ModelParams::parameter_count() const {
	std::size_t n = 0;
	for (const auto &l : layers) {
		n += l.weights.size() + l.biases.size();
	}
	return n;
}

bool ModelParams::same_shape(const ModelParams &other) const {
	return layer_sizes == other.layer_sizes;
}

double to_label(double latency_ms) {
	return std::log1p(latency_ms);
}

double from_label(double label) {
	return std::expm1(label);
}

namespace {

void check_sizes(const std::vector<std::size_t> &sizes) {
	if (sizes.size() < 2) {
		throw InvariantError("a model needs at least an input and an output layer");
	}
	if (sizes.back() != 1) {
		throw InvariantError("model output size must be 1");
	}
	for (auto s : sizes) {
		if (s == 0) {
			throw InvariantError("layer sizes must be positive");
		}
	}
}

ModelParams shaped(const std::vector<std::size_t> &sizes) {
	check_sizes(sizes);
	ModelParams p;
	p.layer_sizes = sizes;
	for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
		DenseLayer l;
		l.in = sizes[i];
		l.out = sizes[i + 1];
		l.weights.assign(l.in * l.out, 0.0);
		l.biases.assign(l.out, 0.0);
		p.layers.push_back(std::move(l));
	}
	return p;
}

// Activations per layer; acts[0] is the input, acts.back() the scalar output.
void forward(const ModelParams &params, std::span<const double> x, std::vector<std::vector<double>> &acts) {
	acts.resize(params.layers.size() + 1);
	acts[0].assign(x.begin(), x.end());
	for (std::size_t li = 0; li < params.layers.size(); ++li) {
		const auto &l = params.layers[li];
		const auto &in = acts[li];
		auto &out = acts[li + 1];
		out.assign(l.out, 0.0);
		const bool hidden = li + 1 < params.layers.size();
		for (std::size_t o = 0; o < l.out; ++o) {
			const double *w = &l.weights[o * l.in];
			double z = l.biases[o];
			for (std::size_t i = 0; i < l.in; ++i) {
				z += w[i] * in[i];
			}
			out[o] = hidden ? (z > 0.0 ? z : 0.0) : z;
		}
	}
}

void check_input(const ModelParams &params, std::span<const double> feature) {
	if (params.layers.empty()) {
		throw InvariantError("model has no layers");
	}
	if (feature.size() != params.input_dim()) {
		throw InvariantError(
		    fmt::format("feature dimension {} does not match model input {}", feature.size(), params.input_dim()));
	}
}

} // namespace

ModelParams init_params(const std::vector<std::size_t> &layer_sizes, std::uint64_t rng_seed) {
	auto p = shaped(layer_sizes);
	Rng rng(rng_seed);
	for (auto &l : p.layers) {
		const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
		std::uniform_real_distribution<double> dist(-bound, bound);
		for (auto &w : l.weights) {
			w = dist(rng);
		}
	}
	return p;
}

ModelParams zeros_like(const ModelParams &params) {
	return shaped(params.layer_sizes);
}

double predict(const ModelParams &params, std::span<const double> feature) {
	check_input(params, feature);
	thread_local std::vector<std::vector<double>> acts;
	forward(params, feature, acts);
	return acts.back()[0];
}

double predict_latency_ms(const ModelParams &params, std::span<const double> feature) {
	return from_label(predict(params, feature));
}

double batch_loss(const ModelParams &params, const TrainBatch &batch) {
	if (batch.size() == 0 || batch.features.size() != batch.labels.size()) {
		throw InvariantError("batch must be nonempty with one label per feature vector");
	}
	double sum = 0.0;
	for (std::size_t i = 0; i < batch.size(); ++i) {
		const double err = predict(params, batch.features[i]) - batch.labels[i];
		sum += err * err;
	}
	return sum / static_cast<double>(batch.size());
}

ModelParams batch_grad(const ModelParams &params, const TrainBatch &batch) {
	if (batch.size() == 0 || batch.features.size() != batch.labels.size()) {
		throw InvariantError("batch must be nonempty with one label per feature vector");
	}
	auto grad = zeros_like(params);
	std::vector<std::vector<double>> acts;
	std::vector<double> delta;
	std::vector<double> prev_delta;
	const double scale = 2.0 / static_cast<double>(batch.size());
	for (std::size_t s = 0; s < batch.size(); ++s) {
		check_input(params, batch.features[s]);
		forward(params, batch.features[s], acts);
		delta.assign(1, scale * (acts.back()[0] - batch.labels[s]));
		for (std::size_t li = params.layers.size(); li-- > 0;) {
			const auto &l = params.layers[li];
			auto &g = grad.layers[li];
			const auto &in = acts[li];
			for (std::size_t o = 0; o < l.out; ++o) {
				const double d = delta[o];
				if (d == 0.0) {
					continue;
				}
				g.biases[o] += d;
				double *gw = &g.weights[o * l.in];
				for (std::size_t i = 0; i < l.in; ++i) {
					gw[i] += d * in[i];
				}
			}
			if (li == 0) {
				break;
			}
			prev_delta.assign(l.in, 0.0);
			for (std::size_t o = 0; o < l.out; ++o) {
				const double d = delta[o];
				if (d == 0.0) {
					continue;
				}
				const double *w = &l.weights[o * l.in];
				for (std::size_t i = 0; i < l.in; ++i) {
					prev_delta[i] += w[i] * d;
				}
			}
			// rectifier derivative of the layer below
			for (std::size_t i = 0; i < l.in; ++i) {
				if (in[i] <= 0.0) {
					prev_delta[i] = 0.0;
				}
			}
			delta.swap(prev_delta);
		}
	}
	return grad;
}

ModelParams add_scaled(const ModelParams &a, const ModelParams &b, double scale) {
	if (!a.same_shape(b)) {
		throw InvariantError("parameter shapes differ");
	}
	ModelParams out = a;
	for (std::size_t li = 0; li < out.layers.size(); ++li) {
		auto &l = out.layers[li];
		const auto &bl = b.layers[li];
		for (std::size_t i = 0; i < l.weights.size(); ++i) {
			l.weights[i] += scale * bl.weights[i];
		}
		for (std::size_t i = 0; i < l.biases.size(); ++i) {
			l.biases[i] += scale * bl.biases[i];
		}
	}
	return out;
}

ModelParams sgd_step(const ModelParams &params, const ModelParams &grad, double lr) {
	if (!(lr >= 0.0)) {
		throw InvariantError("learning rate must be >= 0");
	}
	return add_scaled(params, grad, -lr);
}

std::vector<double> flatten(const ModelParams &params) {
	std::vector<double> out;
	out.reserve(params.parameter_count());
	for (const auto &l : params.layers) {
		out.insert(out.end(), l.weights.begin(), l.weights.end());
		out.insert(out.end(), l.biases.begin(), l.biases.end());
	}
	return out;
}

ModelParams unflatten(const ModelParams &shape, std::span<const double> values) {
	if (values.size() != shape.parameter_count()) {
		throw InvariantError("flat parameter count does not match the model shape");
	}
	ModelParams out = zeros_like(shape);
	std::size_t k = 0;
	for (auto &l : out.layers) {
		for (auto &w : l.weights) {
			w = values[k++];
		}
		for (auto &b : l.biases) {
			b = values[k++];
		}
	}
	return out;
}

namespace {
constexpr const char *kCheckpointMagic = "reload-model";
constexpr int kCheckpointVersion = 1;
} // namespace

void save_checkpoint(const ModelParams &params, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw Error(fmt::format("{}: cannot open for writing", path.string()));
	}
	out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
	out << "layers";
	for (auto s : params.layer_sizes) {
		out << ' ' << s;
	}
	out << '\n' << std::hexfloat;
	for (const auto &l : params.layers) {
		for (std::size_t o = 0; o < l.out; ++o) {
			for (std::size_t i = 0; i < l.in; ++i) {
				out << (i ? " " : "") << l.weights[o * l.in + i];
			}
			out << '\n';
		}
		for (std::size_t o = 0; o < l.out; ++o) {
			out << (o ? " " : "") << l.biases[o];
		}
		out << '\n';
	}
	if (!out) {
		throw Error(fmt::format("{}: write failed", path.string()));
	}
}

ModelParams load_checkpoint(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ParseError(fmt::format("{}: cannot open checkpoint", path.string()));
	}
	std::string magic;
	int version = 0;
	in >> magic >> version;
	if (magic != kCheckpointMagic || version != kCheckpointVersion) {
		throw ParseError(fmt::format("{}: not a version {} model checkpoint", path.string(), kCheckpointVersion));
	}
	std::string line;
	std::getline(in, line);
	std::getline(in, line);
	std::istringstream header(line);
	std::string tag;
	header >> tag;
	if (tag != "layers") {
		throw ParseError(fmt::format("{}: missing layer sizes", path.string()));
	}
	std::vector<std::size_t> sizes;
	for (std::size_t s; header >> s;) {
		sizes.push_back(s);
	}
	ModelParams p;
	try {
		p = shaped(sizes);
	} catch (const InvariantError &e) {
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	}
	// strtod reads hex floats; iostream extraction of them is unreliable
	std::string token;
	auto next = [&]() {
		if (!(in >> token)) {
			throw ParseError(fmt::format("{}: truncated checkpoint", path.string()));
		}
		char *end = nullptr;
		const double v = std::strtod(token.c_str(), &end);
		if (end == token.c_str() || *end != '\0') {
			throw ParseError(fmt::format("{}: bad number '{}'", path.string(), token));
		}
		return v;
	};
	for (auto &l : p.layers) {
		for (auto &w : l.weights) {
			w = next();
		}
		for (auto &b : l.biases) {
			b = next();
		}
	}
	if (in >> token) {
		throw ParseError(fmt::format("{}: trailing data in checkpoint", path.string()));
	}
	return p;
}

} // namespace reload
