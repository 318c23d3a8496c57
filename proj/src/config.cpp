#include "reload/config.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>

namespace reload {

void RunConfig::validate() const {
	cost.validate();
	auto fail = [](const std::string &msg) { throw InvariantError("run config: " + msg); };
	for (auto h : hidden_layers) {
		if (h == 0) {
			fail("hidden layer sizes must be positive");
		}
	}
	if (!(learning_rate > 0.0)) {
		fail("learning_rate must be > 0");
	}
	if (minibatch == 0) {
		fail("minibatch must be >= 1");
	}
	if (retention.k_replay == 0) {
		fail("retention.k_replay must be >= 1");
	}
	if (retention.capacity == 0) {
		fail("retention.capacity must be >= 1");
	}
	if (!(retention.alpha_td > 0.0)) {
		fail("retention.alpha_td must be > 0");
	}
	if (!(retention.gamma >= 0.0 && retention.gamma <= 1.0)) {
		fail("retention.gamma must lie in [0, 1]");
	}
	if (!(retention.policy.beta_mix >= 0.0 && retention.policy.beta_mix <= 1.0)) {
		fail("retention.beta_mix must lie in [0, 1]");
	}
	if (transfer.k_tasks < 2) {
		fail("transfer.k_tasks must be >= 2");
	}
	if (transfer.maml.alpha_inner < 0.0 || transfer.maml.beta_outer < 0.0) {
		fail("transfer learning rates must be >= 0");
	}
	if (search.beam_width == 0) {
		fail("search.beam_width must be >= 1");
	}
	if (!(search.epsilon >= 0.0 && search.epsilon <= 1.0)) {
		fail("search.epsilon must lie in [0, 1]");
	}
	if (!(search.epsilon_decay >= 0.0 && search.epsilon_decay <= 1.0)) {
		fail("search.epsilon_decay must lie in [0, 1]");
	}
	if (eval_interval == 0) {
		fail("eval_interval must be >= 1");
	}
	if (repetitions == 0) {
		fail("repetitions must be >= 1");
	}
	if (expert_runs < 2) {
		fail("expert_runs must be >= 2");
	}
	if (!(rebound_window > 0.0 && rebound_window <= 1.0)) {
		fail("rebound_window must lie in (0, 1]");
	}
	if (convergence_sustain == 0) {
		fail("convergence_sustain must be >= 1");
	}
}

namespace {

using nlohmann::json;

void reject_unknown(const json &obj, const std::set<std::string> &allowed, const std::string &where) {
	if (!obj.is_object()) {
		throw ParseError(fmt::format("{}: expected an object", where));
	}
	for (const auto &item : obj.items()) {
		if (!allowed.count(item.key())) {
			throw ParseError(fmt::format("{}: unknown key '{}'", where, item.key()));
		}
	}
}

template <class T>
void read(const json &obj, const char *key, T &out, const std::string &where) {
	auto it = obj.find(key);
	if (it == obj.end()) {
		return;
	}
	try {
		out = it->template get<T>();
	} catch (const json::exception &) {
		throw ParseError(fmt::format("{}.{}: wrong type", where, key));
	}
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
	std::filesystem::path path(p);
	return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

RunConfig parse_run_config(const json &doc, const std::filesystem::path &base_dir) {
	RunConfig cfg;
	reject_unknown(doc,
	               {"catalog", "train_workload", "test_workload", "cost_model", "model", "retention", "transfer", "search",
	                "iterations", "eval_interval", "seed", "repetitions", "expert_runs", "rebound_window",
	                "convergence_sustain", "dp_limit"},
	               "config");
	std::string path;
	if (doc.contains("catalog")) {
		read(doc, "catalog", path, "config");
		cfg.catalog = resolve(base_dir, path);
	}
	if (doc.contains("train_workload")) {
		read(doc, "train_workload", path, "config");
		cfg.train_workload = resolve(base_dir, path);
	}
	if (doc.contains("test_workload")) {
		read(doc, "test_workload", path, "config");
		cfg.test_workload = resolve(base_dir, path);
	}
	if (doc.contains("cost_model")) {
		const auto &c = doc["cost_model"];
		const std::string w = "config.cost_model";
		reject_unknown(c,
		               {"scan_cost_per_row", "cpu_cost_per_row", "hash_build_cost_per_row", "nlj_cost_per_row_pair",
		                "merge_sort_cost_per_row_log_row", "latency_per_cost_unit", "noise_rel_sigma"},
		               w);
		read(c, "scan_cost_per_row", cfg.cost.scan_cost_per_row, w);
		read(c, "cpu_cost_per_row", cfg.cost.cpu_cost_per_row, w);
		read(c, "hash_build_cost_per_row", cfg.cost.hash_build_cost_per_row, w);
		read(c, "nlj_cost_per_row_pair", cfg.cost.nlj_cost_per_row_pair, w);
		read(c, "merge_sort_cost_per_row_log_row", cfg.cost.merge_sort_cost_per_row_log_row, w);
		read(c, "latency_per_cost_unit", cfg.cost.latency_per_cost_unit, w);
		read(c, "noise_rel_sigma", cfg.cost.noise_rel_sigma, w);
	}
	if (doc.contains("model")) {
		const auto &m = doc["model"];
		const std::string w = "config.model";
		reject_unknown(m, {"hidden_layers", "learning_rate", "minibatch", "train_passes"}, w);
		read(m, "hidden_layers", cfg.hidden_layers, w);
		read(m, "learning_rate", cfg.learning_rate, w);
		read(m, "minibatch", cfg.minibatch, w);
		read(m, "train_passes", cfg.train_passes, w);
	}
	if (doc.contains("retention")) {
		const auto &r = doc["retention"];
		const std::string w = "config.retention";
		reject_unknown(r, {"enabled", "weighting", "beta_mix", "alpha_td", "gamma", "k_replay", "capacity"}, w);
		read(r, "enabled", cfg.retention.enabled, w);
		if (r.contains("weighting")) {
			std::string name;
			read(r, "weighting", name, w);
			cfg.retention.policy.kind = parse_weighting(name);
		}
		read(r, "beta_mix", cfg.retention.policy.beta_mix, w);
		read(r, "alpha_td", cfg.retention.alpha_td, w);
		read(r, "gamma", cfg.retention.gamma, w);
		read(r, "k_replay", cfg.retention.k_replay, w);
		read(r, "capacity", cfg.retention.capacity, w);
	}
	if (doc.contains("transfer")) {
		const auto &t = doc["transfer"];
		const std::string w = "config.transfer";
		reject_unknown(t,
		               {"enabled", "k_tasks", "policy", "alpha_inner", "beta_outer", "n_inner", "n_outer", "support_size",
		                "query_size", "rollouts_per_query"},
		               w);
		read(t, "enabled", cfg.transfer.enabled, w);
		read(t, "k_tasks", cfg.transfer.k_tasks, w);
		if (t.contains("policy") && !t["policy"].is_null()) {
			std::string name;
			read(t, "policy", name, w);
			cfg.transfer.policy = parse_partitioning(name);
		}
		read(t, "alpha_inner", cfg.transfer.maml.alpha_inner, w);
		read(t, "beta_outer", cfg.transfer.maml.beta_outer, w);
		read(t, "n_inner", cfg.transfer.maml.n_inner, w);
		read(t, "n_outer", cfg.transfer.maml.n_outer, w);
		read(t, "support_size", cfg.transfer.maml.support_size, w);
		read(t, "query_size", cfg.transfer.maml.query_size, w);
		read(t, "rollouts_per_query", cfg.transfer.rollouts_per_query, w);
	}
	if (doc.contains("search")) {
		const auto &s = doc["search"];
		const std::string w = "config.search";
		reject_unknown(s, {"beam_width", "epsilon", "epsilon_decay", "left_deep"}, w);
		read(s, "beam_width", cfg.search.beam_width, w);
		read(s, "epsilon", cfg.search.epsilon, w);
		read(s, "epsilon_decay", cfg.search.epsilon_decay, w);
		bool left_deep = false;
		read(s, "left_deep", left_deep, w);
		cfg.search.shape = left_deep ? PlanShape::LeftDeep : PlanShape::Bushy;
	}
	read(doc, "iterations", cfg.iterations, "config");
	read(doc, "eval_interval", cfg.eval_interval, "config");
	read(doc, "seed", cfg.seed, "config");
	read(doc, "repetitions", cfg.repetitions, "config");
	read(doc, "expert_runs", cfg.expert_runs, "config");
	read(doc, "rebound_window", cfg.rebound_window, "config");
	read(doc, "convergence_sustain", cfg.convergence_sustain, "config");
	read(doc, "dp_limit", cfg.dp_limit, "config");
	cfg.validate();
	return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ParseError(fmt::format("{}: cannot open run configuration", path.string()));
	}
	json doc;
	try {
		doc = json::parse(in);
	} catch (const json::parse_error &e) {
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	}
	try {
		return parse_run_config(doc, path.parent_path());
	} catch (const ParseError &e) {
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	} catch (const InvariantError &e) {
		throw InvariantError(fmt::format("{}: {}", path.string(), e.what()));
	}
}

nlohmann::ordered_json to_json(const RunConfig &cfg) {
	nlohmann::ordered_json doc;
	doc["catalog"] = cfg.catalog.string();
	doc["train_workload"] = cfg.train_workload.string();
	doc["test_workload"] = cfg.test_workload.string();
	doc["cost_model"] = {{"scan_cost_per_row", cfg.cost.scan_cost_per_row},
	                     {"cpu_cost_per_row", cfg.cost.cpu_cost_per_row},
	                     {"hash_build_cost_per_row", cfg.cost.hash_build_cost_per_row},
	                     {"nlj_cost_per_row_pair", cfg.cost.nlj_cost_per_row_pair},
	                     {"merge_sort_cost_per_row_log_row", cfg.cost.merge_sort_cost_per_row_log_row},
	                     {"latency_per_cost_unit", cfg.cost.latency_per_cost_unit},
	                     {"noise_rel_sigma", cfg.cost.noise_rel_sigma}};
	doc["model"] = {{"hidden_layers", cfg.hidden_layers},
	                {"learning_rate", cfg.learning_rate},
	                {"minibatch", cfg.minibatch},
	                {"train_passes", cfg.train_passes}};
	doc["retention"] = {{"enabled", cfg.retention.enabled},
	                    {"weighting", to_string(cfg.retention.policy.kind)},
	                    {"beta_mix", cfg.retention.policy.beta_mix},
	                    {"alpha_td", cfg.retention.alpha_td},
	                    {"gamma", cfg.retention.gamma},
	                    {"k_replay", cfg.retention.k_replay},
	                    {"capacity", cfg.retention.capacity}};
	nlohmann::ordered_json transfer = {{"enabled", cfg.transfer.enabled}, {"k_tasks", cfg.transfer.k_tasks}};
	transfer["policy"] = cfg.transfer.policy ? nlohmann::ordered_json(to_string(*cfg.transfer.policy)) : nlohmann::ordered_json();
	transfer["alpha_inner"] = cfg.transfer.maml.alpha_inner;
	transfer["beta_outer"] = cfg.transfer.maml.beta_outer;
	transfer["n_inner"] = cfg.transfer.maml.n_inner;
	transfer["n_outer"] = cfg.transfer.maml.n_outer;
	transfer["support_size"] = cfg.transfer.maml.support_size;
	transfer["query_size"] = cfg.transfer.maml.query_size;
	transfer["rollouts_per_query"] = cfg.transfer.rollouts_per_query;
	doc["transfer"] = std::move(transfer);
	doc["search"] = {{"beam_width", cfg.search.beam_width},
	                 {"epsilon", cfg.search.epsilon},
	                 {"epsilon_decay", cfg.search.epsilon_decay},
	                 {"left_deep", cfg.search.shape == PlanShape::LeftDeep}};
	doc["iterations"] = cfg.iterations;
	doc["eval_interval"] = cfg.eval_interval;
	doc["seed"] = cfg.seed;
	doc["repetitions"] = cfg.repetitions;
	doc["expert_runs"] = cfg.expert_runs;
	doc["rebound_window"] = cfg.rebound_window;
	doc["convergence_sustain"] = cfg.convergence_sustain;
	doc["dp_limit"] = cfg.dp_limit;
	return doc;
}

} // namespace reload
