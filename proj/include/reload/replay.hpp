#pragma once

#include "reload/catalog.hpp"
#include "reload/cost_model.hpp"
#include "reload/features.hpp"
#include "reload/plan.hpp"
#include "reload/value_model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reload {

//! One join-rooted subplan of an executed plan.
struct Experience {
	std::string query_id;
	//! Subplan s_t. The recency slot is 0 when stored.
	FeatureVector state_features;
	//! Smallest enclosing join s_{t+1}; nullopt for the plan root (terminal successor).
	std::optional<FeatureVector> next_state_features;
	//! Regression target: -(latency of the whole plan) in ms.
	double reward_to_go = 0;
	//! r_{t+1} in ms: 0 below the root, -latency at the root.
	double transition_reward = 0;
	//! Training iteration at which the experience was stored.
	std::uint64_t stored_at = 0;
	double predicted_latency_at_store = 0;

	bool is_terminal() const {
		return !next_state_features.has_value();
	}
};

//! One experience per join node of a complete plan, root first (pre-order).
std::vector<Experience> extract_experiences(const PlanNode &plan, const CostModel &cost_model,
                                            const Featurizer &featurizer, double latency_ms,
                                            std::uint64_t iteration, const ModelParams &model);
std::vector<Experience> extract_experiences(const PlanNode &plan, const Query &query, const Catalog &catalog,
                                            const CostModelConfig &cfg, double latency_ms, std::uint64_t iteration,
                                            const ModelParams &model);

//! Fixed-capacity buffer; once full, each push evicts the oldest experience.
class ReplayBuffer {
public:
	explicit ReplayBuffer(std::size_t capacity);

	void push(Experience exp);
	void clear();

	std::size_t size() const {
		return size_;
	}
	std::size_t capacity() const {
		return slots_.size();
	}
	bool empty() const {
		return size_ == 0;
	}
	//! i = 0 is the oldest experience.
	const Experience &operator[](std::size_t i) const;

	std::uint64_t current_iteration() const {
		return current_iteration_;
	}
	void set_current_iteration(std::uint64_t iteration) {
		current_iteration_ = iteration;
	}
	//! Normalization span T for recency: current iteration minus the oldest stored
	//! iteration, or 1 when that difference is 0.
	double recency_span() const;

private:
	std::vector<Experience> slots_;
	std::size_t head_ = 0;
	std::size_t size_ = 0;
	std::uint64_t current_iteration_ = 0;
};

//! 1 - (current - stored) / span. Throws unless 0 <= current - stored <= span and span > 0.
double recency_weight(std::uint64_t stored_at, std::uint64_t current, double span);

//! r + gamma * v_next - v_current.
double td_error(double reward, double v_next, double v_current, double gamma);
//! TD error of an experience under a model, in label space: V(s) = -predict(s),
//! r = -log1p(-transition_reward), V(terminal) = 0. recency fills the features' recency slot.
double td_error(const Experience &exp, const ModelParams &model, double gamma, double recency = 0.0);

//! Min-max scaling of |delta|^alpha into [0, 1]; all-equal inputs map to 0.5.
std::vector<double> normalize_td(const std::vector<double> &deltas, double alpha_td);

struct WeightingPolicy {
	enum class Kind { RecencyOnly, TDErrorLow, TDErrorHigh, Hybrid };
	Kind kind = Kind::Hybrid;
	double beta_mix = 0.5;

	static WeightingPolicy recency() {
		return {Kind::RecencyOnly, 0.0};
	}
	static WeightingPolicy td_low() {
		return {Kind::TDErrorLow, 1.0};
	}
	static WeightingPolicy td_high() {
		return {Kind::TDErrorHigh, 1.0};
	}
	static WeightingPolicy hybrid(double beta_mix);
};

const char *to_string(WeightingPolicy::Kind kind);
//! Accepts recency | td-low | td-high | hybrid.
WeightingPolicy::Kind parse_weighting(std::string_view name);

double experience_weight(double td_norm, double recency, const WeightingPolicy &policy);

//! omega_i / sum(omega); uniform when every weight is zero.
std::vector<double> normalize_weights(const std::vector<double> &weights);

//! Per-experience quantities behind one replay draw, in buffer order.
struct ReplayPriorities {
	std::vector<double> recency;
	std::vector<double> td;
	std::vector<double> td_norm;
	std::vector<double> weights;
	std::vector<double> probabilities;
};

ReplayPriorities replay_priorities(const ReplayBuffer &buffer, const ModelParams &model,
                                   const WeightingPolicy &policy, double gamma, double alpha_td);

struct ReplaySample {
	//! Copies of the drawn experiences with the recency slot filled in.
	std::vector<Experience> experiences;
	std::vector<std::size_t> indices;
	double mean_td_norm = 0;
	double mean_recency = 0;
};

//! Draws k_replay experiences with replacement from Multinomial(k, p) where p are the
//! normalized policy weights recomputed from the current model.
ReplaySample sample_replay(const ReplayBuffer &buffer, const ModelParams &model, const WeightingPolicy &policy,
                           std::size_t k_replay, double gamma, double alpha_td, std::uint64_t rng_seed);

//! Debug dump of the buffer contents; not a stable format.
nlohmann::ordered_json dump_buffer(const ReplayBuffer &buffer);

} // namespace reload
