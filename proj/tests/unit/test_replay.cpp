#include "reload/error.hpp"
#include "reload/expert.hpp"
#include "reload/replay.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

using namespace reload;

namespace {

Experience make_experience(std::uint64_t stored_at, double label_hint = 0) {
	Experience e;
	e.query_id = "q";
	e.state_features = {label_hint, 0.0};
	e.reward_to_go = -1;
	e.transition_reward = -1;
	e.stored_at = stored_at;
	return e;
}

} // namespace

TEST_CASE("experiences follow the join tree") {
	const Catalog cat({{"A", 100, 8, 1.0}, {"B", 200, 8, 1.0}, {"C", 300, 8, 1.0}, {"D", 50, 8, 1.0}},
	                  {{"A", "B", 0.01}, {"B", "C", 0.02}, {"C", "D", 0.1}});
	const Query q("q", {"A", "B", "C", "D"}, {{"A", "B"}, {"B", "C"}, {"C", "D"}}, 0, {"SELECT"}, {"A"});
	const auto ab = PlanNode::join(PlanNode::scan(0), PlanNode::scan(1), JoinOperator::Hash);
	const auto cd = PlanNode::join(PlanNode::scan(2), PlanNode::scan(3), JoinOperator::Merge);
	const auto root = PlanNode::join(ab, cd, JoinOperator::NestedLoop);
	const auto model = init_params({Featurizer(cat).dimension(), 4, 1}, 3);
	const auto exps = extract_experiences(*root, q, cat, {}, 12.5, 7, model);
	REQUIRE(exps.size() == 3);

	const CostModel cm(q, cat, {});
	const Featurizer fz(cat);
	CHECK(exps[0].state_features == fz.featurize(*root, cm));
	CHECK(exps[0].is_terminal());
	CHECK(exps[0].transition_reward == -12.5);
	CHECK(exps[1].state_features == fz.featurize(*ab, cm));
	CHECK(exps[2].state_features == fz.featurize(*cd, cm));
	for (std::size_t i = 1; i < 3; ++i) {
		REQUIRE(exps[i].next_state_features.has_value());
		CHECK(*exps[i].next_state_features == exps[0].state_features);
		CHECK(exps[i].transition_reward == 0);
	}
	for (const auto &e : exps) {
		CHECK(e.reward_to_go == -12.5);
		CHECK(e.stored_at == 7);
		CHECK(e.query_id == "q");
		CHECK(e.state_features[fz.recency_slot()] == 0);
		CHECK(e.predicted_latency_at_store == predict_latency_ms(model, e.state_features));
	}
	CHECK_THROWS_AS(extract_experiences(*ab, q, cat, {}, 1.0, 0, model), InvariantError);
	CHECK_THROWS_AS(extract_experiences(*root, q, cat, {}, 0.0, 0, model), InvariantError);
}

TEST_CASE("random plans yield one experience per join with a consistent chain") {
	Rng rng(4);
	const auto cat = testing::random_catalog(rng, 7);
	const auto model = init_params({Featurizer(cat).dimension(), 8, 1}, 1);
	for (int trial = 0; trial < 30; ++trial) {
		const auto q = testing::random_query(rng, cat, 2 + uniform_index(rng, 4), "q");
		const auto plans = testing::all_plans(q, q.all());
		const auto &plan = plans[uniform_index(rng, plans.size())];
		const auto exps = extract_experiences(*plan, q, cat, {}, 3.0, 0, model);
		CHECK(exps.size() == q.size() - 1);
		std::size_t terminal = 0;
		for (const auto &e : exps) {
			terminal += e.is_terminal();
			if (!e.is_terminal()) {
				bool found = false;
				for (const auto &other : exps) {
					found = found || other.state_features == *e.next_state_features;
				}
				CHECK(found);
			}
		}
		CHECK(terminal == 1);
	}
}

TEST_CASE("buffer keeps the newest experiences in insertion order") {
	ReplayBuffer buf(3);
	CHECK(buf.empty());
	CHECK(buf.recency_span() == 1.0);
	for (std::uint64_t i = 0; i < 5; ++i) {
		buf.push(make_experience(i));
	}
	CHECK(buf.size() == 3);
	CHECK(buf.capacity() == 3);
	CHECK(buf[0].stored_at == 2);
	CHECK(buf[1].stored_at == 3);
	CHECK(buf[2].stored_at == 4);
	CHECK_THROWS_AS(buf[3], InvariantError);
	buf.set_current_iteration(10);
	CHECK(buf.recency_span() == 8.0);
	buf.set_current_iteration(2);
	buf.clear();
	buf.push(make_experience(2));
	CHECK(buf.recency_span() == 1.0);
	CHECK_THROWS_AS(ReplayBuffer(0), InvariantError);
}

TEST_CASE("buffer never exceeds its capacity") {
	Rng rng(8);
	for (int trial = 0; trial < 50; ++trial) {
		const auto cap = 1 + uniform_index(rng, 20);
		const auto pushes = uniform_index(rng, 60);
		ReplayBuffer buf(cap);
		for (std::size_t i = 0; i < pushes; ++i) {
			buf.push(make_experience(i));
			CHECK(buf.size() <= cap);
		}
		CHECK(buf.size() == std::min(cap, pushes));
		for (std::size_t i = 0; i < buf.size(); ++i) {
			CHECK(buf[i].stored_at == pushes - buf.size() + i);
		}
	}
}

TEST_CASE("recency and TD weights") {
	CHECK(recency_weight(10, 10, 5) == 1.0);
	CHECK(recency_weight(5, 10, 5) == 0.0);
	CHECK(recency_weight(8, 10, 4) == 0.5);
	CHECK_THROWS_AS(recency_weight(11, 10, 5), InvariantError);
	CHECK_THROWS_AS(recency_weight(0, 10, 5), InvariantError);
	CHECK_THROWS_AS(recency_weight(0, 0, 0), InvariantError);

	CHECK(td_error(-1, -3, -2, 1.0) == -2);
	CHECK(td_error(0, -3, -2, 0.5) == 0.5);

	const auto n = normalize_td({1, -3, 2}, 1.0);
	CHECK(n[0] == 0);
	CHECK(n[1] == 1);
	CHECK(n[2] == 0.5);
	const auto sq = normalize_td({1, -3, 2}, 2.0);
	CHECK(sq[2] == doctest::Approx(3.0 / 8.0));
	CHECK(normalize_td({2, -2, 2}, 1.0) == std::vector<double> {0.5, 0.5, 0.5});
	CHECK_THROWS_AS(normalize_td({}, 1.0), InvariantError);
	CHECK_THROWS_AS(normalize_td({1.0}, 0.0), InvariantError);

	CHECK(experience_weight(0.2, 0.6, WeightingPolicy::recency()) == 0.6);
	CHECK(experience_weight(0.2, 0.6, WeightingPolicy::td_high()) == 0.2);
	CHECK(experience_weight(0.2, 0.6, WeightingPolicy::td_low()) == 0.8);
	CHECK(experience_weight(0.2, 0.6, WeightingPolicy::hybrid(0.25)) == doctest::Approx(0.25 * 0.2 + 0.75 * 0.6));
	CHECK_THROWS_AS(WeightingPolicy::hybrid(1.5), InvariantError);

	CHECK(normalize_weights({1, 3}) == std::vector<double> {0.25, 0.75});
	CHECK(normalize_weights({0, 0, 0, 0}) == std::vector<double>(4, 0.25));
	CHECK_THROWS_AS(normalize_weights({1, -1}), InvariantError);
	CHECK_THROWS_AS(normalize_weights({}), InvariantError);

	for (auto k : {WeightingPolicy::Kind::RecencyOnly, WeightingPolicy::Kind::TDErrorLow,
	               WeightingPolicy::Kind::TDErrorHigh, WeightingPolicy::Kind::Hybrid}) {
		CHECK(parse_weighting(to_string(k)) == k);
	}
	CHECK_THROWS_AS(parse_weighting("greedy"), InvariantError);
}

TEST_CASE("normalized quantities stay in range on random inputs") {
	Rng rng(19);
	for (int trial = 0; trial < 200; ++trial) {
		std::vector<double> deltas(1 + uniform_index(rng, 30));
		for (auto &d : deltas) {
			d = uniform_real(rng, -50, 50);
		}
		const double alpha = uniform_real(rng, 0.1, 3.0);
		const auto n = normalize_td(deltas, alpha);
		std::vector<double> w;
		for (double x : n) {
			CHECK(x >= 0);
			CHECK(x <= 1);
			w.push_back(experience_weight(x, uniform_real(rng, 0, 1), WeightingPolicy::hybrid(uniform_real(rng, 0, 1))));
		}
		double total = 0;
		for (double p : normalize_weights(w)) {
			CHECK(p >= 0);
			total += p;
		}
		CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
	}
}

TEST_CASE("TD error of an experience is computed in label space") {
	auto model = zeros_like(init_params({3, 1}, 0));
	model.layers[0].weights = {1.0, 0.0, 2.0}; // V(s) = -(x0 + 2 * recency)

	Experience root;
	root.state_features = {4.0, 0.0, 0.0};
	root.transition_reward = -(std::exp(3.0) - 1);
	CHECK(td_error(root, model, 1.0) == doctest::Approx(-3.0 + 4.0));

	Experience inner;
	inner.state_features = {1.0, 0.0, 0.0};
	inner.next_state_features = FeatureVector {4.0, 0.0, 0.0};
	inner.transition_reward = 0;
	CHECK(td_error(inner, model, 1.0) == doctest::Approx(-4.0 + 1.0));
	CHECK(td_error(inner, model, 0.5) == doctest::Approx(-2.0 + 1.0));
	// the recency slot enters both values and cancels at gamma = 1
	CHECK(td_error(inner, model, 1.0, 0.7) == doctest::Approx(-3.0));
}

TEST_CASE("replay sampling matches the multinomial probabilities") {
	ReplayBuffer buf(4);
	buf.push(make_experience(0, 0.0));
	buf.push(make_experience(2, 1.0));
	buf.push(make_experience(3, 2.0));
	buf.push(make_experience(4, 3.0));
	buf.set_current_iteration(4);
	auto model = zeros_like(init_params({2, 1}, 0));
	model.layers[0].weights = {1.0, 0.0};

	const auto p = replay_priorities(buf, model, WeightingPolicy::recency(), 1.0, 1.0);
	CHECK(p.recency == std::vector<double> {0.0, 0.5, 0.75, 1.0});
	const std::vector<double> expected {0.0, 0.5 / 2.25, 0.75 / 2.25, 1.0 / 2.25};
	for (std::size_t i = 0; i < 4; ++i) {
		CHECK(p.probabilities[i] == doctest::Approx(expected[i]));
	}

	const std::size_t k = 200000;
	const auto s = sample_replay(buf, model, WeightingPolicy::recency(), k, 1.0, 1.0, 99);
	CHECK(s.experiences.size() == k);
	std::map<std::size_t, double> counts;
	double recency_sum = 0;
	for (std::size_t i = 0; i < k; ++i) {
		counts[s.indices[i]] += 1;
		CHECK(s.experiences[i].state_features[1] == p.recency[s.indices[i]]);
		recency_sum += p.recency[s.indices[i]];
	}
	CHECK(counts[0] == 0);
	for (std::size_t i = 1; i < 4; ++i) {
		const double sd = std::sqrt(k * expected[i] * (1 - expected[i]));
		CHECK(std::abs(counts[i] - k * expected[i]) < 5 * sd);
	}
	CHECK(s.mean_recency == doctest::Approx(recency_sum / k));

	const auto again = sample_replay(buf, model, WeightingPolicy::recency(), k, 1.0, 1.0, 99);
	CHECK(again.indices == s.indices);
	CHECK_THROWS_AS(sample_replay(buf, model, WeightingPolicy::recency(), 0, 1.0, 1.0, 1), InvariantError);
	CHECK_THROWS_AS(sample_replay(ReplayBuffer(2), model, WeightingPolicy::recency(), 1, 1.0, 1.0, 1), InvariantError);
}

TEST_CASE("high and low TD policies favour opposite experiences") {
	ReplayBuffer buf(3);
	for (double label : {0.0, 5.0, 1.0}) {
		buf.push(make_experience(0, label));
	}
	auto model = zeros_like(init_params({2, 1}, 0));
	model.layers[0].weights = {1.0, 0.0};
	const auto high = replay_priorities(buf, model, WeightingPolicy::td_high(), 1.0, 1.0);
	const auto low = replay_priorities(buf, model, WeightingPolicy::td_low(), 1.0, 1.0);
	CHECK(high.probabilities[1] > high.probabilities[2]);
	CHECK(low.probabilities[1] == 0);
	for (std::size_t i = 0; i < 3; ++i) {
		CHECK(low.weights[i] == doctest::Approx(1 - high.weights[i]));
	}
	CHECK(dump_buffer(buf)["size"] == 3);
}

TEST_CASE("hybrid extremes order like their pure policies") {
	Rng rng(27);
	auto argsort = [](const std::vector<double> &w) {
		std::vector<std::size_t> idx(w.size());
		std::iota(idx.begin(), idx.end(), 0);
		std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
		return idx;
	};
	for (int trial = 0; trial < 200; ++trial) {
		const auto n = 2 + uniform_index(rng, 20);
		std::vector<double> td(n);
		std::vector<double> tau(n);
		for (std::size_t i = 0; i < n; ++i) {
			td[i] = uniform_real(rng, 0, 1);
			tau[i] = uniform_real(rng, 0, 1);
		}
		auto weights = [&](const WeightingPolicy &p) {
			std::vector<double> w;
			for (std::size_t i = 0; i < n; ++i) {
				w.push_back(experience_weight(td[i], tau[i], p));
			}
			return w;
		};
		CHECK(argsort(weights(WeightingPolicy::hybrid(1.0))) == argsort(weights(WeightingPolicy::td_high())));
		CHECK(argsort(weights(WeightingPolicy::hybrid(0.0))) == argsort(weights(WeightingPolicy::recency())));
	}
}

TEST_CASE("recency falls with age and normalization keeps the order of magnitudes") {
	Rng rng(28);
	for (int trial = 0; trial < 200; ++trial) {
		const double span = 1 + static_cast<double>(uniform_index(rng, 100));
		const std::uint64_t current = 200;
		double prev = 2;
		for (std::uint64_t age = 0; age <= static_cast<std::uint64_t>(span); ++age) {
			const double r = recency_weight(current - age, current, span);
			CHECK(r >= 0);
			CHECK(r <= 1);
			CHECK(r < prev);
			prev = r;
		}
		std::vector<double> deltas(2 + uniform_index(rng, 15));
		for (auto &d : deltas) {
			d = uniform_real(rng, -4, 4);
		}
		const auto n = normalize_td(deltas, uniform_real(rng, 0.2, 3));
		for (std::size_t i = 0; i < deltas.size(); ++i) {
			for (std::size_t j = 0; j < deltas.size(); ++j) {
				if (std::abs(deltas[i]) < std::abs(deltas[j])) {
					CHECK(n[i] <= n[j]);
				}
			}
		}
	}
}
