#include "reload/replay.hpp"

#include "reload/error.hpp"
#include "reload/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace reload {

std::vector<Experience> extract_experiences(const PlanNode &plan, const CostModel &cost_model,
                                            const Featurizer &featurizer, double latency_ms,
                                            std::uint64_t iteration, const ModelParams &model) {
	if (plan.relations() != cost_model.query().all()) {
		throw InvariantError(fmt::format("experience extraction needs a complete plan for query '{}'",
		                                 cost_model.query().id()));
	}
	if (!(latency_ms > 0.0)) {
		throw InvariantError("experience extraction needs a positive latency");
	}
	std::vector<Experience> out;
	// (node, index of the enclosing join's experience or -1 for the root)
	std::vector<std::pair<const PlanNode *, std::ptrdiff_t>> stack {{&plan, -1}};
	while (!stack.empty()) {
		auto [node, parent] = stack.back();
		stack.pop_back();
		if (node->is_scan()) {
			continue;
		}
		Experience e;
		e.query_id = cost_model.query().id();
		e.state_features = featurizer.featurize(*node, cost_model);
		if (parent >= 0) {
			e.next_state_features = out[static_cast<std::size_t>(parent)].state_features;
		}
		e.reward_to_go = -latency_ms;
		e.transition_reward = parent < 0 ? -latency_ms : 0.0;
		e.stored_at = iteration;
		e.predicted_latency_at_store = predict_latency_ms(model, e.state_features);
		out.push_back(std::move(e));
		const auto self = static_cast<std::ptrdiff_t>(out.size() - 1);
		stack.push_back({node->right().get(), self});
		stack.push_back({node->left().get(), self});
	}
	return out;
}

std::vector<Experience> extract_experiences(const PlanNode &plan, const Query &query, const Catalog &catalog,
                                            const CostModelConfig &cfg, double latency_ms, std::uint64_t iteration,
                                            const ModelParams &model) {
	return extract_experiences(plan, CostModel(query, catalog, cfg), Featurizer(catalog), latency_ms, iteration,
	                           model);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : slots_(capacity) {
	if (capacity == 0) {
		throw InvariantError("replay buffer capacity must be positive");
	}
}

void ReplayBuffer::push(Experience exp) {
	if (size_ < slots_.size()) {
		slots_[(head_ + size_) % slots_.size()] = std::move(exp);
		++size_;
		return;
	}
	slots_[head_] = std::move(exp);
	head_ = (head_ + 1) % slots_.size();
}

void ReplayBuffer::clear() {
	for (auto &s : slots_) {
		s = Experience {};
	}
	head_ = 0;
	size_ = 0;
}

const Experience &ReplayBuffer::operator[](std::size_t i) const {
	if (i >= size_) {
		throw InvariantError("replay buffer index out of range");
	}
	return slots_[(head_ + i) % slots_.size()];
}

double ReplayBuffer::recency_span() const {
	if (empty()) {
		return 1.0;
	}
	std::uint64_t oldest = (*this)[0].stored_at;
	for (std::size_t i = 1; i < size_; ++i) {
		oldest = std::min(oldest, (*this)[i].stored_at);
	}
	const auto span = current_iteration_ > oldest ? current_iteration_ - oldest : 0;
	return span == 0 ? 1.0 : static_cast<double>(span);
}

double recency_weight(std::uint64_t stored_at, std::uint64_t current, double span) {
	if (!(span > 0.0)) {
		throw InvariantError("recency span must be positive");
	}
	if (stored_at > current) {
		throw InvariantError("experience stored after the current time");
	}
	const double age = static_cast<double>(current - stored_at);
	if (age > span) {
		throw InvariantError(fmt::format("experience age {} exceeds the recency span {}", age, span));
	}
	return 1.0 - age / span;
}

double td_error(double reward, double v_next, double v_current, double gamma) {
	return reward + gamma * v_next - v_current;
}

double td_error(const Experience &exp, const ModelParams &model, double gamma, double recency) {
	auto value = [&](const FeatureVector &f) {
		thread_local FeatureVector scratch;
		scratch = f;
		set_recency(scratch, recency);
		return -predict(model, scratch);
	};
	const double reward = exp.transition_reward < 0.0 ? -to_label(-exp.transition_reward) : 0.0;
	const double v_next = exp.next_state_features ? value(*exp.next_state_features) : 0.0;
	return td_error(reward, v_next, value(exp.state_features), gamma);
}

std::vector<double> normalize_td(const std::vector<double> &deltas, double alpha_td) {
	if (deltas.empty()) {
		throw InvariantError("normalize_td needs at least one TD error");
	}
	if (!(alpha_td > 0.0)) {
		throw InvariantError("TD normalization exponent must be positive");
	}
	std::vector<double> powered(deltas.size());
	for (std::size_t i = 0; i < deltas.size(); ++i) {
		powered[i] = std::pow(std::abs(deltas[i]), alpha_td);
	}
	const auto [lo, hi] = std::minmax_element(powered.begin(), powered.end());
	const double min = *lo;
	const double range = *hi - *lo;
	std::vector<double> out(deltas.size(), 0.5);
	if (range > 0.0) {
		for (std::size_t i = 0; i < powered.size(); ++i) {
			out[i] = std::clamp((powered[i] - min) / range, 0.0, 1.0);
		}
	}
	return out;
}

WeightingPolicy WeightingPolicy::hybrid(double beta_mix) {
	if (!(beta_mix >= 0.0 && beta_mix <= 1.0)) {
		throw InvariantError("beta_mix must lie in [0, 1]");
	}
	return {Kind::Hybrid, beta_mix};
}

const char *to_string(WeightingPolicy::Kind kind) {
	switch (kind) {
	case WeightingPolicy::Kind::RecencyOnly:
		return "recency";
	case WeightingPolicy::Kind::TDErrorLow:
		return "td-low";
	case WeightingPolicy::Kind::TDErrorHigh:
		return "td-high";
	case WeightingPolicy::Kind::Hybrid:
		return "hybrid";
	}
	return "?";
}

WeightingPolicy::Kind parse_weighting(std::string_view name) {
	for (auto k : {WeightingPolicy::Kind::RecencyOnly, WeightingPolicy::Kind::TDErrorLow,
	               WeightingPolicy::Kind::TDErrorHigh, WeightingPolicy::Kind::Hybrid}) {
		if (name == to_string(k)) {
			return k;
		}
	}
	throw InvariantError(fmt::format("unknown weighting policy '{}'", name));
}

double experience_weight(double td_norm, double recency, const WeightingPolicy &policy) {
	switch (policy.kind) {
	case WeightingPolicy::Kind::RecencyOnly:
		return recency;
	case WeightingPolicy::Kind::TDErrorLow:
		return 1.0 - td_norm;
	case WeightingPolicy::Kind::TDErrorHigh:
		return td_norm;
	case WeightingPolicy::Kind::Hybrid:
		return policy.beta_mix * td_norm + (1.0 - policy.beta_mix) * recency;
	}
	return 0.0;
}

std::vector<double> normalize_weights(const std::vector<double> &weights) {
	if (weights.empty()) {
		throw InvariantError("cannot normalize an empty weight vector");
	}
	double total = 0.0;
	for (double w : weights) {
		if (!(w >= 0.0) || !std::isfinite(w)) {
			throw InvariantError("weights must be finite and nonnegative");
		}
		total += w;
	}
	std::vector<double> out(weights.size());
	if (total == 0.0) {
		std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(weights.size()));
		return out;
	}
	for (std::size_t i = 0; i < weights.size(); ++i) {
		out[i] = weights[i] / total;
	}
	return out;
}

ReplayPriorities replay_priorities(const ReplayBuffer &buffer, const ModelParams &model,
                                   const WeightingPolicy &policy, double gamma, double alpha_td) {
	if (buffer.empty()) {
		throw InvariantError("cannot sample from an empty replay buffer");
	}
	ReplayPriorities p;
	const auto n = buffer.size();
	const double span = buffer.recency_span();
	p.recency.resize(n);
	p.td.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		p.recency[i] = recency_weight(buffer[i].stored_at, buffer.current_iteration(), span);
		p.td[i] = td_error(buffer[i], model, gamma, p.recency[i]);
	}
	p.td_norm = normalize_td(p.td, alpha_td);
	p.weights.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		p.weights[i] = experience_weight(p.td_norm[i], p.recency[i], policy);
	}
	p.probabilities = normalize_weights(p.weights);
	return p;
}

ReplaySample sample_replay(const ReplayBuffer &buffer, const ModelParams &model, const WeightingPolicy &policy,
                           std::size_t k_replay, double gamma, double alpha_td, std::uint64_t rng_seed) {
	if (k_replay == 0) {
		throw InvariantError("replay budget must be at least 1");
	}
	const auto prio = replay_priorities(buffer, model, policy, gamma, alpha_td);
	Rng rng(rng_seed);
	std::discrete_distribution<std::size_t> dist(prio.probabilities.begin(), prio.probabilities.end());
	ReplaySample sample;
	sample.experiences.reserve(k_replay);
	sample.indices.reserve(k_replay);
	for (std::size_t n = 0; n < k_replay; ++n) {
		const auto i = dist(rng);
		sample.indices.push_back(i);
		auto exp = buffer[i];
		set_recency(exp.state_features, prio.recency[i]);
		if (exp.next_state_features) {
			set_recency(*exp.next_state_features, prio.recency[i]);
		}
		sample.mean_td_norm += prio.td_norm[i];
		sample.mean_recency += prio.recency[i];
		sample.experiences.push_back(std::move(exp));
	}
	sample.mean_td_norm /= static_cast<double>(k_replay);
	sample.mean_recency /= static_cast<double>(k_replay);
	return sample;
}

nlohmann::ordered_json dump_buffer(const ReplayBuffer &buffer) {
	nlohmann::ordered_json doc;
	doc["capacity"] = buffer.capacity();
	doc["size"] = buffer.size();
	doc["current_iteration"] = buffer.current_iteration();
	doc["experiences"] = nlohmann::ordered_json::array();
	for (std::size_t i = 0; i < buffer.size(); ++i) {
		const auto &e = buffer[i];
		nlohmann::ordered_json row;
		row["query_id"] = e.query_id;
		row["stored_at"] = e.stored_at;
		row["terminal"] = e.is_terminal();
		row["reward_to_go"] = e.reward_to_go;
		row["transition_reward"] = e.transition_reward;
		row["predicted_latency_at_store"] = e.predicted_latency_at_store;
		row["state_features"] = e.state_features;
		doc["experiences"].push_back(std::move(row));
	}
	return doc;
}

} // namespace reload
