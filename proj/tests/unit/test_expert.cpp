#include "reload/error.hpp"
#include "reload/expert.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <limits>

using namespace reload;

namespace {

double brute_force_min(const Query &q, const Catalog &cat, const CostModelConfig &cfg) {
	double best = std::numeric_limits<double>::infinity();
	for (const auto &p : testing::all_plans(q)) {
		best = std::min(best, plan_cost(*p, q, cat, cfg));
	}
	return best;
}

} // namespace

TEST_CASE("two-relation expert is the cheapest of the six candidates") {
	Rng rng(1);
	const auto cat = testing::random_catalog(rng, 4);
	for (int trial = 0; trial < 20; ++trial) {
		const auto q = testing::random_query(rng, cat, 2, "q");
		const auto plans = testing::all_plans(q);
		REQUIRE(plans.size() == 6);
		const CostModelConfig cfg;
		CHECK(plan_cost(*expert_plan(q, cat, cfg), q, cat, cfg) == brute_force_min(q, cat, cfg));
	}
}

TEST_CASE("expert cost equals the brute-force minimum on random queries") {
	Rng rng(2024);
	for (int trial = 0; trial < 60; ++trial) {
		const auto cat = testing::random_catalog(rng, 6);
		const auto q = testing::random_query(rng, cat, 2 + uniform_index(rng, 4), "q", 0.4);
		CostModelConfig cfg;
		cfg.nlj_cost_per_row_pair = uniform_real(rng, 1e-4, 1e-2);
		cfg.merge_sort_cost_per_row_log_row = uniform_real(rng, 0.01, 0.1);
		const auto plan = expert_plan(q, cat, cfg);
		CHECK_NOTHROW(validate_plan(*plan, q));
		CHECK(plan_cost(*plan, q, cat, cfg) == brute_force_min(q, cat, cfg));
	}
}

TEST_CASE("expert ties are broken deterministically") {
	Rng rng(4);
	const auto cat = testing::random_catalog(rng, 5);
	const auto q = testing::random_query(rng, cat, 4, "q");
	CostModelConfig flat;
	flat.scan_cost_per_row = flat.cpu_cost_per_row = flat.hash_build_cost_per_row = 0;
	flat.nlj_cost_per_row_pair = flat.merge_sort_cost_per_row_log_row = 0;
	const auto a = expert_plan(q, cat, flat);
	const auto b = expert_plan(q, cat, flat);
	CHECK(same_plan(*a, *b));
	// everything costs 0: Hash is preferred at every join
	for (const auto *j : join_nodes(*a)) {
		CHECK(j->op() == JoinOperator::Hash);
	}
}

TEST_CASE("expert respects the DP limit") {
	Rng rng(6);
	const auto cat = testing::random_catalog(rng, 8);
	const auto q = testing::random_query(rng, cat, 6, "q");
	CHECK_THROWS_AS(expert_plan(q, cat, {}, 5), InvariantError);
	CHECK_NOTHROW(expert_plan(q, cat, {}, 6));
}

TEST_CASE("expert baseline") {
	Rng rng(9);
	const auto cat = testing::random_catalog(rng, 5);
	const auto q = testing::random_query(rng, cat, 4, "q");

	CostModelConfig quiet;
	quiet.noise_rel_sigma = 0;
	const auto exact = expert_baseline(q, cat, quiet, 10, 0);
	CHECK(exact.std_latency_ms == 0);
	CHECK(exact.tolerance_ms == 0);
	CHECK(exact.mean_latency_ms == exact.noiseless_latency_ms);
	CHECK(exact.n_runs == 10);

	const CostModelConfig noisy;
	const auto a = expert_baseline(q, cat, noisy, 10, 42);
	const auto b = expert_baseline(q, cat, noisy, 10, 42);
	CHECK(a.mean_latency_ms == b.mean_latency_ms);
	CHECK(a.std_latency_ms == b.std_latency_ms);
	CHECK(a.tolerance_ms == 2 * a.std_latency_ms);
	CHECK(a.upper_band() == a.mean_latency_ms + a.tolerance_ms);

	// the sample std of 10 draws has a coefficient of variation near 0.24, so the
	// median over many baselines of tolerance / (2 * 0.05 * mean) sits close to 1
	std::vector<double> ratios;
	for (std::uint64_t s = 0; s < 400; ++s) {
		const auto bl = expert_baseline(q, cat, noisy, 10, s * 10);
		ratios.push_back(bl.tolerance_ms / (2 * 0.05 * bl.mean_latency_ms));
	}
	std::sort(ratios.begin(), ratios.end());
	CHECK(ratios[200] > 0.9);
	CHECK(ratios[200] < 1.05);

	CHECK_THROWS_AS(expert_baseline(q, cat, noisy, 1, 0), InvariantError);
}
