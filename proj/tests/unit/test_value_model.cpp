#include "reload/error.hpp"
#include "reload/value_model.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace reload;

TEST_CASE("initialization") {
	const auto a = init_params({4, 8, 1}, 7);
	const auto b = init_params({4, 8, 1}, 7);
	CHECK(a == b);
	CHECK_FALSE(a == init_params({4, 8, 1}, 8));
	CHECK(a.parameter_count() == 4 * 8 + 8 + 8 + 1);
	for (const auto &l : a.layers) {
		const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
		for (double w : l.weights) {
			CHECK(std::abs(w) <= bound);
		}
		for (double bias : l.biases) {
			CHECK(bias == 0);
		}
	}
	CHECK_THROWS_AS(init_params({4, 8, 2}, 0), InvariantError);
	CHECK_THROWS_AS(init_params({4}, 0), InvariantError);
}

TEST_CASE("forward pass") {
	const auto zero = zeros_like(init_params({3, 5, 1}, 1));
	CHECK(predict(zero, std::vector<double> {1, -2, 3}) == 0);

	auto linear = init_params({2, 1}, 1);
	linear.layers[0].weights = {0.5, -2};
	CHECK(predict(linear, std::vector<double> {4, 1}) == 0);
	CHECK(predict(linear, std::vector<double> {2, 3}) == -5);
	CHECK_THROWS_AS(predict(linear, std::vector<double> {1}), InvariantError);

	Rng rng(12);
	for (int trial = 0; trial < 50; ++trial) {
		const auto params = testing::random_model(rng, {6, 9, 4, 1});
		std::vector<double> x(6);
		for (auto &v : x) {
			v = uniform_real(rng, -2, 2);
		}
		CHECK(testing::rel_close(predict(params, x), testing::oracle_forward(params, x), 1e-12, 1e-14));
	}
}

TEST_CASE("label transform") {
	CHECK(to_label(0) == 0);
	CHECK(from_label(to_label(123.5)) == doctest::Approx(123.5).epsilon(1e-12));
	CHECK(to_label(std::exp(2.0) - 1) == doctest::Approx(2.0));
}

TEST_CASE("loss") {
	auto linear = init_params({1, 1}, 1);
	linear.layers[0].weights = {3};
	TrainBatch one {{{1.0}}, {1.0}};
	CHECK(batch_loss(linear, one) == 4);

	Rng rng(2);
	const auto params = testing::random_model(rng, {3, 4, 1});
	auto batch = testing::random_batch(rng, 3, 7);
	TrainBatch exact = batch;
	for (std::size_t i = 0; i < exact.size(); ++i) {
		exact.labels[i] = predict(params, exact.features[i]);
	}
	CHECK(batch_loss(params, exact) == 0);

	const double base = batch_loss(params, batch);
	std::reverse(batch.features.begin(), batch.features.end());
	std::reverse(batch.labels.begin(), batch.labels.end());
	CHECK(batch_loss(params, batch) == doctest::Approx(base).epsilon(1e-14));
	CHECK_THROWS_AS(batch_loss(params, TrainBatch {}), InvariantError);
}

TEST_CASE("gradient matches central finite differences") {
	Rng rng(99);
	for (int trial = 0; trial < 10; ++trial) {
		const std::size_t d = 2 + uniform_index(rng, 10);
		const auto params = testing::random_model(rng, {d, 1 + uniform_index(rng, 12), 1 + uniform_index(rng, 6), 1});
		const auto batch = testing::random_batch(rng, d, 1 + uniform_index(rng, 8));
		const auto analytic = flatten(batch_grad(params, batch));
		const auto numeric = testing::finite_difference_grad(params, batch, 1e-5);
		for (std::size_t i = 0; i < analytic.size(); ++i) {
			CHECK(testing::rel_close(analytic[i], numeric[i], 1e-4, 1e-7));
		}
	}
}

TEST_CASE("gradient properties") {
	Rng rng(5);
	const auto params = testing::random_model(rng, {4, 6, 1});
	auto batch = testing::random_batch(rng, 4, 5);

	TrainBatch exact = batch;
	for (std::size_t i = 0; i < exact.size(); ++i) {
		exact.labels[i] = predict(params, exact.features[i]);
	}
	for (double g : flatten(batch_grad(params, exact))) {
		CHECK(g == 0);
	}

	TrainBatch doubled = batch;
	doubled.features.insert(doubled.features.end(), batch.features.begin(), batch.features.end());
	doubled.labels.insert(doubled.labels.end(), batch.labels.begin(), batch.labels.end());
	const auto g1 = flatten(batch_grad(params, batch));
	const auto g2 = flatten(batch_grad(params, doubled));
	for (std::size_t i = 0; i < g1.size(); ++i) {
		CHECK(testing::rel_close(g1[i], g2[i], 1e-12, 1e-15));
	}
}

TEST_CASE("sgd step") {
	Rng rng(6);
	const auto params = testing::random_model(rng, {3, 4, 1});
	const auto batch = testing::random_batch(rng, 3, 4);
	const auto grad = batch_grad(params, batch);
	CHECK(sgd_step(params, grad, 0) == params);
	CHECK(sgd_step(params, zeros_like(params), 0.5) == params);
	const auto copy = params;
	const auto stepped = sgd_step(params, grad, 0.1);
	CHECK(params == copy);
	const auto p = flatten(params);
	const auto g = flatten(grad);
	const auto s = flatten(stepped);
	for (std::size_t i = 0; i < p.size(); ++i) {
		CHECK(s[i] == p[i] - 0.1 * g[i]);
	}
	CHECK_THROWS_AS(sgd_step(params, init_params({2, 1}, 0), 0.1), InvariantError);

	// L(theta) = (theta - 1)^2 through the output bias alone
	auto scalar = zeros_like(init_params({1, 1}, 0));
	const TrainBatch target {{{0.0}}, {1.0}};
	const auto next = sgd_step(scalar, batch_grad(scalar, target), 0.1);
	CHECK(next.layers[0].biases[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("a small step never increases the loss") {
	Rng rng(31);
	for (int trial = 0; trial < 50; ++trial) {
		const auto params = testing::random_model(rng, {5, 8, 1});
		const auto batch = testing::random_batch(rng, 5, 6);
		CHECK(batch_loss(sgd_step(params, batch_grad(params, batch), 1e-5), batch) <= batch_loss(params, batch));
	}
}

TEST_CASE("checkpoints round-trip bit-exactly") {
	const auto dir = testing::scratch_dir("checkpoint");
	Rng rng(77);
	const auto params = testing::random_model(rng, {7, 5, 3, 1}, 3.0);
	save_checkpoint(params, dir / "m.ckpt");
	const auto loaded = load_checkpoint(dir / "m.ckpt");
	CHECK(loaded == params);

	CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), ParseError);
	{
		std::ofstream os(dir / "junk.ckpt");
		os << "something else\n";
	}
	CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), ParseError);
	{
		std::ifstream is(dir / "m.ckpt");
		std::string text((std::istreambuf_iterator<char>(is)), {});
		std::ofstream os(dir / "short.ckpt");
		os << text.substr(0, text.size() / 2);
	}
	CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), ParseError);
}
