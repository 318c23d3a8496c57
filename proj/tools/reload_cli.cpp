#include "reload/config.hpp"
#include "reload/error.hpp"
#include "reload/run_io.hpp"
#include "reload/trainer.hpp"
#include "reload/workload_gen.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace reload;

namespace {

struct RunFlags {
	std::string config;
	std::optional<std::uint64_t> seed;
	std::string out = "out";
	std::optional<std::size_t> reps;
	std::string policy;
	std::optional<std::size_t> k_tasks;
	bool no_transfer = false;
	bool no_retention = false;
	std::string weighting;
};

void add_config_flag(CLI::App &cmd, RunFlags &f) {
	cmd.add_option("--config", f.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
}

void add_seed_flag(CLI::App &cmd, RunFlags &f) {
	cmd.add_option("--seed", f.seed, "Base seed (overrides the config)");
}

void add_out_flag(CLI::App &cmd, RunFlags &f, const std::string &help) {
	cmd.add_option("--out", f.out, help)->capture_default_str();
}

void add_partition_flags(CLI::App &cmd, RunFlags &f) {
	cmd.add_option("--policy", f.policy, "Force a partitioning policy instead of picking the lowest DBI")
	    ->check(CLI::IsMember({"halstead", "operators", "cost", "rows"}));
	cmd.add_option("--k-tasks", f.k_tasks, "Number of meta-training tasks");
}

RunConfig resolve_config(const RunFlags &f) {
	auto cfg = load_run_config(f.config);
	if (f.seed) {
		cfg.seed = *f.seed;
	}
	if (f.reps) {
		cfg.repetitions = *f.reps;
	}
	if (!f.policy.empty()) {
		cfg.transfer.policy = parse_partitioning(f.policy);
	}
	if (f.k_tasks) {
		cfg.transfer.k_tasks = *f.k_tasks;
	}
	if (f.no_transfer) {
		cfg.transfer.enabled = false;
	}
	if (f.no_retention) {
		cfg.retention.enabled = false;
	}
	if (!f.weighting.empty()) {
		cfg.retention.policy.kind = parse_weighting(f.weighting);
	}
	cfg.validate();
	return cfg;
}

void write_text(const fs::path &path, const std::string &text) {
	std::ofstream os(path, std::ios::binary);
	if (!os) {
		throw Error(fmt::format("{}: cannot open for writing", path.string()));
	}
	os << text;
}

std::string task_list(const TaskSet &set) {
	std::string out;
	for (std::size_t t = 0; t < set.tasks.size(); ++t) {
		out += t == 0 ? "[" : " [";
		for (std::size_t i = 0; i < set.tasks[t].size(); ++i) {
			out += (i == 0 ? "" : " ") + set.tasks[t][i];
		}
		out += "]";
	}
	return out;
}

std::string partition_table(const PartitionReport &report) {
	std::string out = fmt::format("{:<10} {:>14} {:>9}  {}\n", "policy", "dbi", "selected", "tasks");
	for (std::size_t i = 0; i < report.candidates.size(); ++i) {
		const auto &c = report.candidates[i];
		out += fmt::format("{:<10} {:>14.6f} {:>9}  {}\n", to_string(c.policy), c.dbi_score,
		                   i == report.selected ? "*" : "", task_list(c));
	}
	out += fmt::format("selected: {}\n", to_string(report.best().policy));
	return out;
}

std::string partition_csv(const PartitionReport &report) {
	std::string out = "policy,dbi,selected,task,query_id\n";
	for (std::size_t i = 0; i < report.candidates.size(); ++i) {
		const auto &c = report.candidates[i];
		for (std::size_t t = 0; t < c.tasks.size(); ++t) {
			for (const auto &id : c.tasks[t]) {
				out += fmt::format("{},{},{},{},{}\n", to_string(c.policy), format_number(c.dbi_score),
				                   i == report.selected ? 1 : 0, t, id);
			}
		}
	}
	return out;
}

int cmd_gen_workload(const WorkloadSpec &spec, const std::string &shape, const std::string &out) {
	auto s = spec;
	s.shape = parse_schema_shape(shape);
	const auto generated = generate_workload(s);
	write_generated(generated, out);
	fmt::print("wrote {} tables, {} train and {} test queries to {}\n", generated.catalog.size(),
	           generated.train.size(), generated.test.size(), out);
	return 0;
}

int cmd_partition_report(const RunFlags &f, bool write_out) {
	const auto cfg = resolve_config(f);
	const auto ws = load_workspace(cfg);
	auto report = partition_report(ws.train, cfg.transfer.k_tasks, ws.catalog, cfg.cost);
	fmt::print("{}", partition_table(report));
	if (write_out) {
		fs::create_directories(f.out);
		write_text(fs::path(f.out) / "partition.csv", partition_csv(report));
	}
	return 0;
}

int cmd_meta_train(const RunFlags &f) {
	const auto cfg = resolve_config(f);
	const auto ws = load_workspace(cfg);
	const auto meta = meta_train(cfg, ws);
	fs::create_directories(f.out);
	save_checkpoint(meta.params, fs::path(f.out) / "meta.ckpt");
	write_text(fs::path(f.out) / "partition.csv", partition_csv(meta.partition));
	fmt::print("{}", partition_table(meta.partition));
	fmt::print("meta-trained parameters written to {}\n", (fs::path(f.out) / "meta.ckpt").string());
	return 0;
}

void write_run_dir(const fs::path &dir, const Workspace &ws, const TrainingResult &run) {
	fs::create_directories(dir);
	write_run_csv(dir / "run.csv", ws, run.records);
	save_checkpoint(run.model, dir / "model.ckpt");
	if (run.partition) {
		write_text(dir / "partition.csv", partition_csv(*run.partition));
	}
}

std::string convergence_text(const std::optional<std::uint64_t> &c) {
	return c ? std::to_string(*c) : "NC";
}

int cmd_train(const RunFlags &f) {
	const auto cfg = resolve_config(f);
	const auto ws = load_workspace(cfg);
	const fs::path out = f.out;
	fs::create_directories(out);
	write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

	const auto report = run_repetitions(cfg, ws, cfg.repetitions);
	std::vector<const TrainingResult *> runs;
	for (std::size_t i = 0; i < report.runs.size(); ++i) {
		runs.push_back(&report.runs[i]);
		write_run_dir(report.runs.size() == 1 ? out : out / fmt::format("rep_{}", i), ws, report.runs[i]);
	}
	write_summary_csv(out / "summary.csv", runs);
	write_verdicts_csv(out / "verdicts.csv", runs);
	if (report.runs.size() > 1) {
		std::string median = "iteration,median_wrl_train,median_wrl_test\n";
		for (std::size_t k = 0; k < report.median_wrl_train.size(); ++k) {
			median += fmt::format("{},{},{}\n", report.runs.front().records[k].iteration,
			                      format_number(report.median_wrl_train[k]), format_number(report.median_wrl_test[k]));
		}
		write_text(out / "median.csv", median);
	}

	for (std::size_t i = 0; i < report.runs.size(); ++i) {
		const auto &s = report.runs[i].summary;
		fmt::print("rep {} seed {}: wrl train {:.4f} test {:.4f}, plateau {}, rebound {}, convergence {}\n", i, s.seed,
		           s.final_wrl_train, s.final_wrl_test, s.plateau, s.rebound, convergence_text(s.convergence));
	}
	if (report.runs.size() > 1) {
		fmt::print("median: wrl train {:.4f} test {:.4f}, regressions {}, convergence {}\n",
		           report.median_wrl_train.back(), report.median_wrl_test.back(), report.median_regressions,
		           std::isinf(report.median_convergence) ? std::string("NC") : format_number(report.median_convergence));
	}
	return 0;
}

int cmd_eval(const RunFlags &f, const std::string &checkpoint_flag) {
	const auto cfg = resolve_config(f);
	const fs::path out = f.out;
	const fs::path checkpoint = checkpoint_flag.empty() ? out / "model.ckpt" : fs::path(checkpoint_flag);
	if (!fs::exists(checkpoint)) {
		throw Error(fmt::format("checkpoint not found: {}", checkpoint.string()));
	}
	const auto ws = load_workspace(cfg);
	const auto model = load_checkpoint(checkpoint);
	const auto baselines = compute_baselines(cfg, ws);
	const auto eval = evaluate_model(cfg, ws, model, baselines, 0);

	// verdicts and convergence come from the recorded run when one exists next to the checkpoint
	std::vector<IterationRecord> records;
	const auto run_csv = checkpoint.parent_path() / "run.csv";
	if (fs::exists(run_csv)) {
		records = read_run_csv(run_csv, ws);
	} else {
		records.push_back(eval.record);
	}
	const auto summary = summarize(cfg, ws, records, baselines.train, baselines.test);

	fmt::print("checkpoint: {}\n", checkpoint.string());
	fmt::print("wrl train {:.4f} test {:.4f}\n", eval.record.wrl_train, eval.record.wrl_test);
	fmt::print("convergence iteration: {}\n", convergence_text(summary.convergence));
	fmt::print("plateau {}, rebound {}\n", summary.plateau, summary.rebound);
	for (const auto &v : summary.verdicts) {
		fmt::print("  {:<5} {:<12} {}\n", v.test ? "test" : "train", v.query_id, to_string(v.verdict.verdict));
	}

	std::string csv = "metric,set,query_id,value\n";
	csv += fmt::format("wrl,train,,{}\n", format_number(eval.record.wrl_train));
	csv += fmt::format("wrl,test,,{}\n", format_number(eval.record.wrl_test));
	csv += fmt::format("convergence_iteration,test,,{}\n", convergence_text(summary.convergence));
	for (const auto &v : summary.verdicts) {
		csv += fmt::format("verdict,{},{},{}\n", v.test ? "test" : "train", v.query_id, to_string(v.verdict.verdict));
	}
	fmt::print("\n{}", csv);
	fs::create_directories(out);
	write_text(out / "eval.csv", csv);
	return 0;
}

int cmd_replay_report(const RunFlags &f) {
	auto cfg = resolve_config(f);
	if (!cfg.retention.enabled) {
		throw Error("replay-report needs retention enabled");
	}
	const auto ws = load_workspace(cfg);
	const auto run = run_training(cfg, ws);
	const auto &buffer = *run.buffer;
	const fs::path out = f.out;
	fs::create_directories(out);

	std::string csv = "index,query_id,stored_at,terminal,recency,td,td_norm,weight,probability\n";
	if (!buffer.empty()) {
		const auto p = replay_priorities(buffer, run.model, cfg.retention.policy, cfg.retention.gamma,
		                                 cfg.retention.alpha_td);
		double mean_recency = 0.0;
		double mean_td_norm = 0.0;
		for (std::size_t i = 0; i < buffer.size(); ++i) {
			const auto &e = buffer[i];
			csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", i, e.query_id, e.stored_at, e.is_terminal() ? 1 : 0,
			                   format_number(p.recency[i]), format_number(p.td[i]), format_number(p.td_norm[i]),
			                   format_number(p.weights[i]), format_number(p.probabilities[i]));
			mean_recency += p.recency[i];
			mean_td_norm += p.td_norm[i];
		}
		const auto n = static_cast<double>(buffer.size());
		fmt::print("buffer: {} of {} experiences, iteration {}\n", buffer.size(), buffer.capacity(),
		           buffer.current_iteration());
		fmt::print("policy: {} (beta {})\n", to_string(cfg.retention.policy.kind), cfg.retention.policy.beta_mix);
		fmt::print("mean recency {:.4f}, mean normalized TD {:.4f}\n", mean_recency / n, mean_td_norm / n);
	}
	write_text(out / "replay.csv", csv);
	fmt::print("per-experience priorities written to {}\n", (out / "replay.csv").string());
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app {"Learned join-order optimizer with experience replay and meta-learned initialization"};
	app.require_subcommand(1);

	WorkloadSpec gen_spec;
	std::string gen_shape = "star";
	std::string gen_out;
	auto *gen = app.add_subcommand("gen-workload", "Generate a synthetic catalog with train and test workloads");
	gen->add_option("--tables", gen_spec.n_tables, "Number of tables")->capture_default_str();
	gen->add_option("--shape", gen_shape, "Schema shape: star, chain, or snowflake")->capture_default_str();
	gen->add_option("--queries", gen_spec.n_queries, "Number of training queries")->capture_default_str();
	gen->add_option("--test-queries", gen_spec.n_test_queries, "Number of test queries")->capture_default_str();
	gen->add_option("--seed", gen_spec.seed, "Generator seed")->capture_default_str();
	gen->add_option("--out", gen_out, "Output directory")->required();

	RunFlags part_flags;
	auto *part = app.add_subcommand("partition-report", "Score all partitioning policies on the training workload");
	add_config_flag(*part, part_flags);
	add_partition_flags(*part, part_flags);
	part->add_option("--out", part_flags.out, "Also write partition.csv into this directory");

	RunFlags meta_flags;
	auto *meta = app.add_subcommand("meta-train", "Meta-train initial value-model parameters");
	add_config_flag(*meta, meta_flags);
	add_seed_flag(*meta, meta_flags);
	add_partition_flags(*meta, meta_flags);
	add_out_flag(*meta, meta_flags, "Output directory");

	RunFlags train_flags;
	auto *train = app.add_subcommand("train", "Train, evaluate periodically, and write run CSVs");
	add_config_flag(*train, train_flags);
	add_seed_flag(*train, train_flags);
	add_out_flag(*train, train_flags, "Output directory");
	train->add_option("--reps", train_flags.reps, "Repetitions with seeds seed .. seed + reps - 1");
	add_partition_flags(*train, train_flags);
	train->add_flag("--no-transfer", train_flags.no_transfer, "Start from random parameters");
	train->add_flag("--no-retention", train_flags.no_retention, "Train only on the current iteration's experiences");
	train->add_option("--weighting", train_flags.weighting, "Replay weighting policy")
	    ->check(CLI::IsMember({"recency", "td-low", "td-high", "hybrid"}));

	RunFlags eval_flags;
	std::string eval_checkpoint;
	auto *eval = app.add_subcommand("eval", "Evaluate a trained checkpoint against the expert");
	add_config_flag(*eval, eval_flags);
	add_seed_flag(*eval, eval_flags);
	add_out_flag(*eval, eval_flags, "Run directory; holds model.ckpt and run.csv");
	eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint path (default <out>/model.ckpt)");

	RunFlags replay_flags;
	auto *replay = app.add_subcommand("replay-report", "Train once and report replay priorities of the final buffer");
	add_config_flag(*replay, replay_flags);
	add_seed_flag(*replay, replay_flags);
	add_out_flag(*replay, replay_flags, "Output directory");
	replay->add_option("--weighting", replay_flags.weighting, "Replay weighting policy")
	    ->check(CLI::IsMember({"recency", "td-low", "td-high", "hybrid"}));

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e);
	} catch (const CLI::CallForAllHelp &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		std::cerr << "error: " << e.what() << '\n';
		return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
	}

	try {
		if (*gen) {
			return cmd_gen_workload(gen_spec, gen_shape, gen_out);
		}
		if (*part) {
			return cmd_partition_report(part_flags, part->count("--out") > 0);
		}
		if (*meta) {
			return cmd_meta_train(meta_flags);
		}
		if (*train) {
			return cmd_train(train_flags);
		}
		if (*eval) {
			return cmd_eval(eval_flags, eval_checkpoint);
		}
		if (*replay) {
			return cmd_replay_report(replay_flags);
		}
	} catch (const std::exception &e) {
		std::string msg = e.what();
		std::replace(msg.begin(), msg.end(), '\n', ' ');
		std::cerr << "error: " << msg << '\n';
		return 1;
	}
	return 1;
}
