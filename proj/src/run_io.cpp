#include "reload/run_io.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace reload {

namespace {

constexpr const char *kFixedRunColumns[] = {"iteration",        "wrl_train",       "wrl_test",
                                            "train_latency_ms", "test_latency_ms", "buffer_size",
                                            "mean_td_norm",     "mean_recency",    "epsilon"};

std::string quote(const std::string &field) {
	if (field.find_first_of(",\"\n") == std::string::npos) {
		return field;
	}
	std::string out = "\"";
	for (char c : field) {
		if (c == '"') {
			out += '"';
		}
		out += c;
	}
	return out + "\"";
}

void write_row(std::ostream &os, const std::vector<std::string> &fields) {
	for (std::size_t i = 0; i < fields.size(); ++i) {
		if (i > 0) {
			os << ',';
		}
		os << quote(fields[i]);
	}
	os << '\n';
}

std::ofstream open_out(const std::filesystem::path &path) {
	std::ofstream os(path, std::ios::binary);
	if (!os) {
		throw Error(fmt::format("{}: cannot open for writing", path.string()));
	}
	return os;
}

std::string optional_iteration(const std::optional<std::uint64_t> &it) {
	return it ? std::to_string(*it) : std::string();
}

double parse_double(const std::string &text, const std::filesystem::path &path, std::size_t line) {
	if (text == "inf") {
		return std::numeric_limits<double>::infinity();
	}
	char *end = nullptr;
	const double v = std::strtod(text.c_str(), &end);
	if (text.empty() || end != text.c_str() + text.size()) {
		throw ParseError(fmt::format("{}:{}: not a number: '{}'", path.string(), line, text));
	}
	return v;
}

std::uint64_t parse_uint(const std::string &text, const std::filesystem::path &path, std::size_t line) {
	std::uint64_t v = 0;
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
	if (ec != std::errc() || ptr != text.data() + text.size()) {
		throw ParseError(fmt::format("{}:{}: not a non-negative integer: '{}'", path.string(), line, text));
	}
	return v;
}

} // namespace

std::string format_number(double x) {
	return fmt::format("{}", x);
}

std::vector<std::string> split_csv_line(const std::string &line) {
	std::vector<std::string> fields(1);
	bool quoted = false;
	for (std::size_t i = 0; i < line.size(); ++i) {
		const char c = line[i];
		if (quoted) {
			if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
				fields.back() += '"';
				++i;
			} else if (c == '"') {
				quoted = false;
			} else {
				fields.back() += c;
			}
		} else if (c == '"') {
			quoted = true;
		} else if (c == ',') {
			fields.emplace_back();
		} else if (c != '\r') {
			fields.back() += c;
		}
	}
	return fields;
}

std::vector<std::string> run_csv_header(const Workspace &ws) {
	std::vector<std::string> header(std::begin(kFixedRunColumns), std::end(kFixedRunColumns));
	for (const auto &q : ws.train) {
		header.push_back("train:" + q.id());
	}
	for (const auto &q : ws.test) {
		header.push_back("test:" + q.id());
	}
	header.push_back("wall_ms");
	return header;
}

void write_run_csv(const std::filesystem::path &path, const Workspace &ws,
                   const std::vector<IterationRecord> &records) {
	auto os = open_out(path);
	write_row(os, run_csv_header(ws));
	for (const auto &r : records) {
		std::vector<std::string> row {std::to_string(r.iteration),   format_number(r.wrl_train),
		                              format_number(r.wrl_test),     format_number(r.train_total()),
		                              format_number(r.test_total()), std::to_string(r.buffer_size),
		                              format_number(r.mean_td_norm), format_number(r.mean_recency),
		                              format_number(r.epsilon)};
		for (double v : r.train_latency) {
			row.push_back(format_number(v));
		}
		for (double v : r.test_latency) {
			row.push_back(format_number(v));
		}
		row.push_back(format_number(r.wall_ms));
		write_row(os, row);
	}
}

std::vector<IterationRecord> read_run_csv(const std::filesystem::path &path, const Workspace &ws) {
	std::ifstream is(path, std::ios::binary);
	if (!is) {
		throw Error(fmt::format("{}: cannot open", path.string()));
	}
	std::string line;
	if (!std::getline(is, line)) {
		throw ParseError(fmt::format("{}: empty file", path.string()));
	}
	const auto header = run_csv_header(ws);
	if (split_csv_line(line) != header) {
		throw ParseError(fmt::format("{}: header does not match the configured workloads", path.string()));
	}
	const std::size_t fixed = std::size(kFixedRunColumns);
	std::vector<IterationRecord> records;
	std::size_t line_no = 1;
	while (std::getline(is, line)) {
		++line_no;
		if (line.empty()) {
			continue;
		}
		const auto f = split_csv_line(line);
		if (f.size() != header.size()) {
			throw ParseError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), line_no, header.size(),
			                             f.size()));
		}
		IterationRecord r;
		r.iteration = parse_uint(f[0], path, line_no);
		r.wrl_train = parse_double(f[1], path, line_no);
		r.wrl_test = parse_double(f[2], path, line_no);
		r.buffer_size = parse_uint(f[5], path, line_no);
		r.mean_td_norm = parse_double(f[6], path, line_no);
		r.mean_recency = parse_double(f[7], path, line_no);
		r.epsilon = parse_double(f[8], path, line_no);
		for (std::size_t i = 0; i < ws.train.size(); ++i) {
			r.train_latency.push_back(parse_double(f[fixed + i], path, line_no));
		}
		for (std::size_t i = 0; i < ws.test.size(); ++i) {
			r.test_latency.push_back(parse_double(f[fixed + ws.train.size() + i], path, line_no));
		}
		r.wall_ms = parse_double(f.back(), path, line_no);
		records.push_back(std::move(r));
	}
	return records;
}

std::vector<std::string> summary_csv_header() {
	return {"rep",      "seed",        "final_wrl_train",       "final_wrl_test",         "plateau",
	        "rebound",  "regressions", "convergence_iteration", "expert_bound_violations"};
}

void write_summary_csv(const std::filesystem::path &path, const std::vector<const TrainingResult *> &runs) {
	auto os = open_out(path);
	write_row(os, summary_csv_header());
	std::vector<double> wrl_train, wrl_test, plateau, rebound, regressions, convergence, violations;
	for (std::size_t i = 0; i < runs.size(); ++i) {
		const auto &s = runs[i]->summary;
		write_row(os, {std::to_string(i), std::to_string(s.seed), format_number(s.final_wrl_train),
		               format_number(s.final_wrl_test), std::to_string(s.plateau), std::to_string(s.rebound),
		               std::to_string(s.regressions()), s.convergence ? std::to_string(*s.convergence) : "NC",
		               std::to_string(s.expert_bound_violations)});
		wrl_train.push_back(s.final_wrl_train);
		wrl_test.push_back(s.final_wrl_test);
		plateau.push_back(static_cast<double>(s.plateau));
		rebound.push_back(static_cast<double>(s.rebound));
		regressions.push_back(static_cast<double>(s.regressions()));
		convergence.push_back(s.convergence ? static_cast<double>(*s.convergence)
		                                    : std::numeric_limits<double>::infinity());
		violations.push_back(static_cast<double>(s.expert_bound_violations));
	}
	if (runs.size() > 1) {
		const double conv = median(convergence);
		write_row(os, {"median", "", format_number(median(wrl_train)), format_number(median(wrl_test)),
		               format_number(median(plateau)), format_number(median(rebound)), format_number(median(regressions)),
		               std::isinf(conv) ? "NC" : format_number(conv), format_number(median(violations))});
	}
}

std::vector<std::string> verdicts_csv_header() {
	return {"rep",        "query_id",   "set",           "verdict",        "first_superior",
	        "regression", "final_latency_ms", "expert_mean_ms", "expert_upper_ms"};
}

void write_verdicts_csv(const std::filesystem::path &path, const std::vector<const TrainingResult *> &runs) {
	auto os = open_out(path);
	write_row(os, verdicts_csv_header());
	for (std::size_t i = 0; i < runs.size(); ++i) {
		const auto &run = *runs[i];
		std::size_t train_i = 0;
		std::size_t test_i = 0;
		for (const auto &v : run.summary.verdicts) {
			const auto &b = v.test ? run.test_baselines.at(test_i++) : run.train_baselines.at(train_i++);
			write_row(os, {std::to_string(i), v.query_id, v.test ? "test" : "train", to_string(v.verdict.verdict),
			               optional_iteration(v.verdict.first_superior), optional_iteration(v.verdict.regression),
			               format_number(v.final_latency_ms), format_number(b.mean_latency_ms),
			               format_number(b.upper_band())});
		}
	}
}

} // namespace reload
