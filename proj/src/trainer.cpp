#include "reload/trainer.hpp"

#include "reload/error.hpp"
#include "reload/maml.hpp"
#include "reload/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace reload {

namespace {

// Seed streams; every random decision of a run derives from (cfg.seed, stream, ...).
enum Stream : std::uint64_t {
	kInitStream = 1,
	kMetaStream,
	kRolloutStream,
	kSearchStream,
	kExecuteStream,
	kReplayStream,
	kShuffleStream,
	kEvalSearchStream,
	kEvalExecuteStream,
	kBaselineStream,
};

// Planning-time features describe current plans, so their recency slot is 1.
constexpr double kCurrentRecency = 1.0;
constexpr double kNoScore = -std::numeric_limits<double>::infinity();

std::uint64_t plan_hash(const PlanNode &node) {
	if (node.is_scan()) {
		return mix_seed(0x5ca11ULL + node.relation());
	}
	return mix_seed(mix_seed(plan_hash(*node.left()) * 31 + static_cast<std::uint64_t>(node.op())) ^
	                (plan_hash(*node.right()) + 0x9e37ULL));
}

std::uint64_t state_key(const PlanState &state) {
	std::vector<std::uint64_t> hashes;
	hashes.reserve(state.fragments.size());
	for (const auto &f : state.fragments) {
		hashes.push_back(plan_hash(*f));
	}
	std::sort(hashes.begin(), hashes.end());
	std::uint64_t key = hashes.size();
	for (auto h : hashes) {
		key = mix_seed(key ^ h);
	}
	return key;
}

struct BeamEntry {
	PlanState state;
	//! Predicted label per fragment; kNoScore for scans.
	std::vector<double> predictions;
	double score = kNoScore;
};

} // namespace

PlanPtr plan_search(const CostModel &cost_model, const Featurizer &featurizer, const ModelParams &model,
                    std::size_t beam_width, double epsilon, std::uint64_t rng_seed, PlanShape shape) {
	if (beam_width == 0) {
		throw InvariantError("beam width must be at least 1");
	}
	const Query &query = cost_model.query();
	Rng rng(rng_seed);

	auto successor = [&](const BeamEntry &from, const Action &a) {
		BeamEntry next;
		next.state = apply_action(from.state, a, query);
		const auto keep = std::min(a.left_fragment, a.right_fragment);
		const auto drop = std::max(a.left_fragment, a.right_fragment);
		next.predictions.reserve(from.predictions.size() - 1);
		for (std::size_t i = 0; i < from.predictions.size(); ++i) {
			if (i == keep) {
				const auto f = featurizer.featurize(*next.state.fragments[keep], cost_model, kCurrentRecency);
				next.predictions.push_back(predict(model, f));
			} else if (i != drop) {
				next.predictions.push_back(from.predictions[i]);
			}
		}
		next.score = *std::max_element(next.predictions.begin(), next.predictions.end());
		return next;
	};

	std::vector<BeamEntry> beam(1);
	beam[0].state = initial_state(query);
	beam[0].predictions.assign(query.size(), kNoScore);

	std::vector<BeamEntry> candidates;
	std::unordered_set<std::uint64_t> seen;
	for (std::size_t step = 0; step + 1 < query.size(); ++step) {
		const bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon;
		if (explore) {
			const auto actions = legal_actions(beam[0].state, query, shape);
			const auto pick = actions[uniform_index(rng, actions.size())];
			auto next = successor(beam[0], pick);
			beam.assign(1, std::move(next));
			continue;
		}
		candidates.clear();
		for (const auto &entry : beam) {
			for (const auto &a : legal_actions(entry.state, query, shape)) {
				candidates.push_back(successor(entry, a));
			}
		}
		std::stable_sort(candidates.begin(), candidates.end(),
		                 [](const BeamEntry &a, const BeamEntry &b) { return a.score < b.score; });
		seen.clear();
		beam.clear();
		for (auto &c : candidates) {
			if (beam.size() == beam_width) {
				break;
			}
			if (seen.insert(state_key(c.state)).second) {
				beam.push_back(std::move(c));
			}
		}
	}
	return beam[0].state.plan();
}

Workspace load_workspace(const RunConfig &cfg) {
	auto catalog = load_catalog(cfg.catalog);
	auto train = load_workload(cfg.train_workload, catalog);
	auto test = cfg.test_workload.empty() ? std::vector<Query> {} : load_workload(cfg.test_workload, catalog);
	return Workspace {std::move(catalog), std::move(train), std::move(test)};
}

double IterationRecord::train_total() const {
	return std::accumulate(train_latency.begin(), train_latency.end(), 0.0);
}

double IterationRecord::test_total() const {
	return std::accumulate(test_latency.begin(), test_latency.end(), 0.0);
}

namespace {

std::vector<std::size_t> layer_sizes(const RunConfig &cfg, const Featurizer &featurizer) {
	std::vector<std::size_t> sizes {featurizer.dimension()};
	sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
	sizes.push_back(1);
	return sizes;
}

void check_workspace(const RunConfig &cfg, const Workspace &ws) {
	if (ws.train.empty()) {
		throw InvariantError("the training workload is empty");
	}
	for (const auto *set : {&ws.train, &ws.test}) {
		for (const auto &q : *set) {
			if (q.size() > cfg.dp_limit) {
				throw InvariantError(fmt::format("query '{}' exceeds the DP limit of {} relations", q.id(), cfg.dp_limit));
			}
		}
	}
}

TrainBatch to_batch(const std::vector<Experience> &exps, std::size_t first, std::size_t count) {
	TrainBatch b;
	b.features.reserve(count);
	b.labels.reserve(count);
	for (std::size_t i = first; i < first + count; ++i) {
		b.features.push_back(exps[i].state_features);
		b.labels.push_back(to_label(-exps[i].reward_to_go));
	}
	return b;
}

ModelParams train_on(ModelParams model, const std::vector<Experience> &sample, const RunConfig &cfg) {
	for (std::size_t pass = 0; pass < cfg.train_passes; ++pass) {
		for (std::size_t first = 0; first < sample.size(); first += cfg.minibatch) {
			const auto count = std::min(cfg.minibatch, sample.size() - first);
			model = sgd_step(model, batch_grad(model, to_batch(sample, first, count)), cfg.learning_rate);
		}
	}
	return model;
}

} // namespace

MetaInit meta_train(const RunConfig &cfg, const Workspace &ws) {
	check_workspace(cfg, ws);
	const Featurizer featurizer(ws.catalog);
	auto theta = init_params(layer_sizes(cfg, featurizer), derive_seed(cfg.seed, {kInitStream}));

	MetaInit out;
	out.partition = partition_report(ws.train, cfg.transfer.k_tasks, ws.catalog, cfg.cost);
	if (cfg.transfer.policy) {
		out.partition.selected = static_cast<std::size_t>(*cfg.transfer.policy);
	}
	const auto &tasks = out.partition.best().tasks;

	std::vector<TrainBatch> pools;
	for (std::size_t t = 0; t < tasks.size(); ++t) {
		TrainBatch pool;
		for (const auto &id : tasks[t]) {
			auto it = std::find_if(ws.train.begin(), ws.train.end(), [&](const Query &q) { return q.id() == id; });
			const auto qi = static_cast<std::uint64_t>(it - ws.train.begin());
			const CostModel cm(*it, ws.catalog, cfg.cost);
			std::vector<PlanPtr> plans {expert_plan(*it, ws.catalog, cfg.cost, cfg.dp_limit)};
			for (std::size_t r = 0; r < cfg.transfer.rollouts_per_query; ++r) {
				plans.push_back(plan_search(cm, featurizer, theta, 1, 1.0, derive_seed(cfg.seed, {kRolloutStream, qi, r}),
				                            cfg.search.shape));
			}
			for (const auto &plan : plans) {
				const double latency = cm.noiseless_latency(*plan);
				if (!(latency > 0.0)) {
					continue;
				}
				for (auto &e : extract_experiences(*plan, cm, featurizer, latency, 0, theta)) {
					set_recency(e.state_features, kCurrentRecency);
					pool.features.push_back(std::move(e.state_features));
					pool.labels.push_back(to_label(latency));
				}
			}
		}
		if (pool.size() > 0) {
			pools.push_back(std::move(pool));
		}
	}
	out.params = maml_outer(theta, pools, cfg.transfer.maml, derive_seed(cfg.seed, {kMetaStream}));
	return out;
}

ExpertBaselines compute_baselines(const RunConfig &cfg, const Workspace &ws) {
	ExpertBaselines out;
	for (std::size_t i = 0; i < ws.train.size(); ++i) {
		out.train.push_back(expert_baseline(ws.train[i], ws.catalog, cfg.cost, cfg.expert_runs,
		                                    derive_seed(cfg.seed, {kBaselineStream, 0, i})));
	}
	for (std::size_t i = 0; i < ws.test.size(); ++i) {
		out.test.push_back(expert_baseline(ws.test[i], ws.catalog, cfg.cost, cfg.expert_runs,
		                                   derive_seed(cfg.seed, {kBaselineStream, 1, i})));
	}
	return out;
}

Evaluation evaluate_model(const RunConfig &cfg, const Workspace &ws, const ModelParams &model,
                          const ExpertBaselines &baselines, std::uint64_t iteration) {
	const Featurizer featurizer(ws.catalog);
	Evaluation eval;
	eval.record.iteration = iteration;
	auto run_set = [&](const std::vector<Query> &queries, const std::vector<ExpertBaseline> &expert,
	                   std::uint64_t set, std::vector<double> &latencies) {
		double learned = 0.0;
		double expert_total = 0.0;
		for (std::size_t i = 0; i < queries.size(); ++i) {
			const CostModel cm(queries[i], ws.catalog, cfg.cost);
			const auto plan = plan_search(cm, featurizer, model, cfg.search.beam_width, 0.0,
			                              derive_seed(cfg.seed, {kEvalSearchStream, iteration, set, i}), cfg.search.shape);
			validate_plan(*plan, queries[i]);
			const double noiseless = cm.noiseless_latency(*plan);
			if (noiseless < expert[i].noiseless_latency_ms * (1.0 - 1e-12)) {
				++eval.expert_bound_violations;
			}
			latencies.push_back(cm.execute(*plan, derive_seed(cfg.seed, {kEvalExecuteStream, iteration, set, i})));
			learned += latencies.back();
			expert_total += expert[i].mean_latency_ms;
		}
		return expert_total > 0.0 ? learned / expert_total : 0.0;
	};
	eval.record.wrl_train = run_set(ws.train, baselines.train, 0, eval.record.train_latency);
	eval.record.wrl_test = run_set(ws.test, baselines.test, 1, eval.record.test_latency);
	return eval;
}

TrainingResult run_training(const RunConfig &cfg) {
	cfg.validate();
	return run_training(cfg, load_workspace(cfg));
}

TrainingResult run_training(const RunConfig &cfg, const Workspace &ws) {
	cfg.validate();
	check_workspace(cfg, ws);
	const auto started = std::chrono::steady_clock::now();
	const Featurizer featurizer(ws.catalog);

	TrainingResult result;
	if (cfg.transfer.enabled) {
		auto meta = meta_train(cfg, ws);
		result.model = std::move(meta.params);
		result.partition = std::move(meta.partition);
	} else {
		result.model = init_params(layer_sizes(cfg, featurizer), derive_seed(cfg.seed, {kInitStream}));
	}
	auto &model = result.model;

	auto baselines = compute_baselines(cfg, ws);
	std::vector<CostModel> train_models;
	for (const auto &q : ws.train) {
		train_models.emplace_back(q, ws.catalog, cfg.cost);
	}

	ReplayBuffer buffer(cfg.retention.capacity);
	double epsilon = cfg.search.epsilon;
	double last_td_norm = 0.0;
	double last_recency = 0.0;

	auto evaluate = [&](std::uint64_t iteration) {
		auto eval = evaluate_model(cfg, ws, model, baselines, iteration);
		auto &rec = eval.record;
		rec.buffer_size = buffer.size();
		rec.mean_td_norm = last_td_norm;
		rec.mean_recency = last_recency;
		rec.epsilon = epsilon;
		rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
		result.summary.expert_bound_violations += eval.expert_bound_violations;
		result.records.push_back(std::move(rec));
	};

	evaluate(0);
	for (std::uint64_t it = 1; it <= cfg.iterations; ++it) {
		buffer.set_current_iteration(it);
		std::vector<Experience> current;
		for (std::size_t i = 0; i < train_models.size(); ++i) {
			const auto &cm = train_models[i];
			const auto plan = plan_search(cm, featurizer, model, cfg.search.beam_width, epsilon,
			                              derive_seed(cfg.seed, {kSearchStream, it, i}), cfg.search.shape);
			const double latency = cm.execute(*plan, derive_seed(cfg.seed, {kExecuteStream, it, i}));
			if (!(latency > 0.0)) {
				continue;
			}
			for (auto &e : extract_experiences(*plan, cm, featurizer, latency, it, model)) {
				if (cfg.retention.enabled) {
					buffer.push(e);
				}
				current.push_back(std::move(e));
			}
		}

		std::vector<Experience> sample;
		if (cfg.retention.enabled && !buffer.empty()) {
			auto drawn = sample_replay(buffer, model, cfg.retention.policy, cfg.retention.k_replay, cfg.retention.gamma,
			                           cfg.retention.alpha_td, derive_seed(cfg.seed, {kReplayStream, it}));
			last_td_norm = drawn.mean_td_norm;
			last_recency = drawn.mean_recency;
			sample = std::move(drawn.experiences);
		} else {
			for (auto &e : current) {
				set_recency(e.state_features, kCurrentRecency);
			}
			Rng shuffle_rng(derive_seed(cfg.seed, {kShuffleStream, it}));
			std::shuffle(current.begin(), current.end(), shuffle_rng);
			sample = std::move(current);
		}
		if (!sample.empty()) {
			model = train_on(std::move(model), sample, cfg);
		}
		epsilon *= cfg.search.epsilon_decay;
		if (it % cfg.eval_interval == 0) {
			evaluate(it);
		}
	}

	result.buffer = std::move(buffer);
	result.train_baselines = std::move(baselines.train);
	result.test_baselines = std::move(baselines.test);
	const auto violations = result.summary.expert_bound_violations;
	result.summary = summarize(cfg, ws, result.records, result.train_baselines, result.test_baselines);
	result.summary.expert_bound_violations = violations;
	return result;
}

RunSummary summarize(const RunConfig &cfg, const Workspace &ws, const std::vector<IterationRecord> &records,
                     const std::vector<ExpertBaseline> &train_baselines,
                     const std::vector<ExpertBaseline> &test_baselines) {
	RunSummary s;
	s.seed = cfg.seed;
	if (records.empty()) {
		return s;
	}
	s.final_wrl_train = records.back().wrl_train;
	s.final_wrl_test = records.back().wrl_test;
	auto classify = [&](const std::vector<Query> &queries, const std::vector<ExpertBaseline> &baselines, bool test) {
		for (std::size_t i = 0; i < queries.size(); ++i) {
			QueryTrace trace;
			trace.query_id = queries[i].id();
			trace.baseline = baselines[i];
			for (const auto &r : records) {
				const auto &lat = test ? r.test_latency : r.train_latency;
				trace.points.push_back({r.iteration, lat.at(i)});
			}
			QueryVerdict v;
			v.query_id = trace.query_id;
			v.test = test;
			v.final_latency_ms = trace.points.back().latency_ms;
			if (trace.points.size() >= 2) {
				v.verdict = classify_query(trace, cfg.rebound_window);
			} else {
				// a single evaluation cannot regress; inferior means it never reached the band
				v.verdict.verdict = trace.points[0].latency_ms > trace.baseline.upper_band() ? Verdict::Plateau
				                                                                             : Verdict::Superior;
				if (v.verdict.verdict == Verdict::Superior) {
					v.verdict.first_superior = trace.points[0].iteration;
				}
			}
			s.plateau += v.verdict.verdict == Verdict::Plateau;
			s.rebound += v.verdict.verdict == Verdict::Rebound;
			s.verdicts.push_back(std::move(v));
		}
	};
	classify(ws.train, train_baselines, false);
	classify(ws.test, test_baselines, true);

	if (!ws.test.empty()) {
		double expert_total = 0.0;
		double tolerance = 0.0;
		for (const auto &b : test_baselines) {
			expert_total += b.mean_latency_ms;
			tolerance += b.tolerance_ms;
		}
		std::vector<EvalPoint> series;
		for (const auto &r : records) {
			series.push_back({r.iteration, r.test_total()});
		}
		s.convergence = convergence_iteration(series, expert_total, tolerance, cfg.convergence_sustain);
	}
	return s;
}

double median(std::vector<double> values) {
	if (values.empty()) {
		throw InvariantError("median of an empty list");
	}
	std::sort(values.begin(), values.end());
	const auto n = values.size();
	if (n % 2 == 1) {
		return values[n / 2];
	}
	const double lo = values[n / 2 - 1];
	const double hi = values[n / 2];
	if (std::isinf(lo) || std::isinf(hi)) {
		return std::isinf(lo) ? lo : hi;
	}
	return 0.5 * (lo + hi);
}

RepetitionReport run_repetitions(const RunConfig &cfg, std::size_t n_reps) {
	cfg.validate();
	return run_repetitions(cfg, load_workspace(cfg), n_reps);
}

RepetitionReport run_repetitions(const RunConfig &cfg, const Workspace &ws, std::size_t n_reps) {
	if (n_reps == 0) {
		throw InvariantError("at least one repetition is required");
	}
	RepetitionReport report;
	for (std::size_t r = 0; r < n_reps; ++r) {
		auto rep_cfg = cfg;
		rep_cfg.seed = cfg.seed + r;
		report.runs.push_back(run_training(rep_cfg, ws));
	}
	const auto n_records = report.runs.front().records.size();
	for (std::size_t k = 0; k < n_records; ++k) {
		std::vector<double> train;
		std::vector<double> test;
		for (const auto &run : report.runs) {
			train.push_back(run.records[k].wrl_train);
			test.push_back(run.records[k].wrl_test);
		}
		report.median_wrl_train.push_back(median(train));
		report.median_wrl_test.push_back(median(test));
	}
	std::vector<double> conv;
	std::vector<double> regressions;
	std::vector<double> plateau;
	std::vector<double> rebound;
	for (const auto &run : report.runs) {
		const auto &s = run.summary;
		conv.push_back(s.convergence ? static_cast<double>(*s.convergence) : std::numeric_limits<double>::infinity());
		report.no_convergence_runs += !s.convergence;
		regressions.push_back(static_cast<double>(s.regressions()));
		plateau.push_back(static_cast<double>(s.plateau));
		rebound.push_back(static_cast<double>(s.rebound));
	}
	report.median_convergence = median(conv);
	report.median_regressions = median(regressions);
	report.median_plateau = median(plateau);
	report.median_rebound = median(rebound);
	return report;
}

} // namespace reload
