#include "reload/config.hpp"
#include "reload/run_io.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Output {
	int status = 0;
	std::string out;
	std::string err;
};

std::string slurp(const fs::path &path) {
	std::ifstream is(path, std::ios::binary);
	std::ostringstream ss;
	ss << is.rdbuf();
	return ss.str();
}

Output run_cli(const fs::path &dir, const std::string &args) {
	const auto cmd = fmt::format("\"{}\" {} > \"{}\" 2> \"{}\"", RELOAD_CLI, args, (dir / "stdout.txt").string(),
	                             (dir / "stderr.txt").string());
	const int raw = std::system(cmd.c_str());
	Output o;
	o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
	o.out = slurp(dir / "stdout.txt");
	o.err = slurp(dir / "stderr.txt");
	return o;
}

// Small run over the bundled workload, written next to the scratch outputs.
fs::path small_config(const fs::path &dir) {
	auto doc = reload::to_json(reload::load_run_config(testing::data_dir() / "config.json"));
	doc["iterations"] = 6;
	doc["eval_interval"] = 3;
	doc["repetitions"] = 1;
	doc["expert_runs"] = 3;
	doc["model"]["hidden_layers"] = {8};
	doc["retention"]["k_replay"] = 16;
	doc["transfer"]["n_outer"] = 2;
	doc["transfer"]["rollouts_per_query"] = 1;
	std::ofstream os(dir / "config.json");
	os << doc.dump(2);
	return dir / "config.json";
}

std::size_t count_lines(const std::string &text) {
	return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

TEST_CASE("help and usage errors") {
	const auto dir = testing::scratch_dir("cli-usage");
	auto o = run_cli(dir, "--help");
	CHECK(o.status == 0);
	for (const char *sub : {"gen-workload", "partition-report", "meta-train", "train", "eval", "replay-report"}) {
		CHECK(o.out.find(sub) != std::string::npos);
	}
	o = run_cli(dir, "");
	CHECK(o.status != 0);
	o = run_cli(dir, "train --bogus");
	CHECK(o.status != 0);
	CHECK(o.err.rfind("error: ", 0) == 0);
	CHECK(count_lines(o.err) == 1);
	o = run_cli(dir, "train --config /does/not/exist.json");
	CHECK(o.status != 0);
	o = run_cli(dir, "gen-workload --shape ring --out " + (dir / "g").string());
	CHECK(o.status == 1);
	CHECK(o.err.find("unknown schema shape") != std::string::npos);
}

TEST_CASE("gen-workload writes a loadable workload") {
	const auto dir = testing::scratch_dir("cli-gen");
	const auto o = run_cli(dir, fmt::format("gen-workload --tables 5 --shape chain --queries 4 --test-queries 2 "
	                                        "--seed 3 --out \"{}\"",
	                                        (dir / "w").string()));
	REQUIRE(o.status == 0);
	const auto cat = reload::load_catalog(dir / "w" / "catalog.json");
	CHECK(cat.size() == 5);
	CHECK(reload::load_workload(dir / "w" / "train.json", cat).size() == 4);
	CHECK(reload::load_workload(dir / "w" / "test.json", cat).size() == 2);
}

TEST_CASE("partition-report lists every policy and marks the selection") {
	const auto dir = testing::scratch_dir("cli-partition");
	const auto cfg = small_config(dir);
	auto o = run_cli(dir, fmt::format("partition-report --config \"{}\" --out \"{}\"", cfg.string(), dir.string()));
	REQUIRE(o.status == 0);
	for (const char *p : {"halstead", "operators", "cost", "rows"}) {
		CHECK(o.out.find(p) != std::string::npos);
	}
	CHECK(o.out.find("selected: ") != std::string::npos);
	const auto csv = slurp(dir / "partition.csv");
	CHECK(csv.rfind("policy,dbi,selected,task,query_id\n", 0) == 0);
	CHECK(count_lines(csv) == 1 + 4 * 10);

	o = run_cli(dir, fmt::format("partition-report --config \"{}\" --k-tasks 11", cfg.string()));
	CHECK(o.status == 1);
	CHECK(o.err.find("k_tasks") != std::string::npos);
}

TEST_CASE("train, eval, and replay-report") {
	const auto dir = testing::scratch_dir("cli-train");
	const auto cfg = small_config(dir);
	const auto out = dir / "run";
	auto o = run_cli(dir, fmt::format("train --config \"{}\" --out \"{}\" --seed 4", cfg.string(), out.string()));
	REQUIRE(o.status == 0);
	CHECK(o.out.find("rep 0 seed 4") != std::string::npos);
	for (const char *f : {"run.csv", "model.ckpt", "summary.csv", "verdicts.csv", "config.json", "partition.csv"}) {
		CHECK(fs::exists(out / f));
	}
	CHECK(count_lines(slurp(out / "run.csv")) == 1 + 3);
	CHECK(count_lines(slurp(out / "verdicts.csv")) == 1 + 13);
	CHECK(reload::load_run_config(out / "config.json").seed == 4);

	o = run_cli(dir, fmt::format("eval --config \"{}\" --out \"{}\"", cfg.string(), out.string()));
	REQUIRE(o.status == 0);
	CHECK(o.out.find("wrl train") != std::string::npos);
	const auto eval_csv = slurp(out / "eval.csv");
	CHECK(eval_csv.rfind("metric,set,query_id,value\n", 0) == 0);
	CHECK(count_lines(eval_csv) == 1 + 3 + 13);

	o = run_cli(dir, fmt::format("eval --config \"{}\" --out \"{}\"", cfg.string(), (dir / "empty").string()));
	CHECK(o.status == 1);
	CHECK(o.err.find("checkpoint not found") != std::string::npos);

	o = run_cli(dir, fmt::format("train --config \"{}\" --out \"{}\" --reps 2 --no-transfer --weighting recency",
	                             cfg.string(), (dir / "reps").string()));
	REQUIRE(o.status == 0);
	CHECK(fs::exists(dir / "reps" / "rep_0" / "run.csv"));
	CHECK(fs::exists(dir / "reps" / "rep_1" / "model.ckpt"));
	CHECK(fs::exists(dir / "reps" / "median.csv"));
	CHECK(o.out.find("median:") != std::string::npos);
	const auto summary = slurp(dir / "reps" / "summary.csv");
	CHECK(count_lines(summary) == 1 + 2 + 1);

	o = run_cli(dir, fmt::format("replay-report --config \"{}\" --out \"{}\"", cfg.string(), (dir / "replay").string()));
	REQUIRE(o.status == 0);
	const auto replay = slurp(dir / "replay" / "replay.csv");
	CHECK(replay.rfind("index,query_id,stored_at,terminal,recency,td,td_norm,weight,probability\n", 0) == 0);
	CHECK(count_lines(replay) > 1);

	o = run_cli(dir, fmt::format("meta-train --config \"{}\" --out \"{}\"", cfg.string(), (dir / "meta").string()));
	REQUIRE(o.status == 0);
	CHECK(fs::exists(dir / "meta" / "meta.ckpt"));
}
