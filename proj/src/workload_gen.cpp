#include "reload/workload_gen.hpp"

#include "reload/error.hpp"
#include "reload/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace reload {

const char *to_string(SchemaShape shape) {
	switch (shape) {
	case SchemaShape::Star:
		return "star";
	case SchemaShape::Chain:
		return "chain";
	case SchemaShape::Snowflake:
		return "snowflake";
	}
	return "?";
}

SchemaShape parse_schema_shape(std::string_view name) {
	if (name == "star") {
		return SchemaShape::Star;
	}
	if (name == "chain") {
		return SchemaShape::Chain;
	}
	if (name == "snowflake") {
		return SchemaShape::Snowflake;
	}
	throw ParseError(fmt::format("unknown schema shape '{}' (expected star, chain, or snowflake)", name));
}

namespace {

double log_uniform(Rng &rng, double lo, double hi) {
	return std::exp(uniform_real(rng, std::log(lo), std::log(hi)));
}

struct Schema {
	std::vector<std::string> names;
	std::vector<std::pair<std::size_t, std::size_t>> edges;
};

Schema make_schema(const WorkloadSpec &spec, Rng &rng) {
	Schema s;
	const auto n = spec.n_tables;
	if (spec.shape == SchemaShape::Chain) {
		for (std::size_t i = 0; i < n; ++i) {
			s.names.push_back(fmt::format("t{}", i + 1));
			if (i > 0) {
				s.edges.emplace_back(i - 1, i);
			}
		}
		return s;
	}
	s.names.push_back("fact");
	// snowflake: the first half of the dimensions hang off the fact table, the rest off a random earlier dimension
	const std::size_t first_level = spec.shape == SchemaShape::Star ? n - 1 : std::max<std::size_t>(1, n / 2);
	for (std::size_t i = 1; i < n; ++i) {
		s.names.push_back(fmt::format("dim{}", i));
		const std::size_t parent = i <= first_level ? 0 : 1 + uniform_index(rng, first_level);
		s.edges.emplace_back(parent, i);
	}
	return s;
}

constexpr std::array kFilterOperators {"=", "<", ">", "LIKE", "BETWEEN", "IN"};
constexpr std::array kAggregates {"COUNT", "SUM", "MIN", "MAX", "AVG"};

Query make_query(const std::string &id, const Schema &schema, std::size_t max_relations, Rng &rng) {
	const auto n = schema.names.size();
	const auto m = 2 + uniform_index(rng, std::min(n, max_relations) - 1);

	std::vector<std::size_t> chosen {uniform_index(rng, n)};
	while (chosen.size() < m) {
		std::vector<std::size_t> frontier;
		for (const auto &[a, b] : schema.edges) {
			const bool has_a = std::find(chosen.begin(), chosen.end(), a) != chosen.end();
			const bool has_b = std::find(chosen.begin(), chosen.end(), b) != chosen.end();
			if (has_a != has_b) {
				frontier.push_back(has_a ? b : a);
			}
		}
		std::sort(frontier.begin(), frontier.end());
		frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
		chosen.push_back(frontier[uniform_index(rng, frontier.size())]);
	}

	std::vector<std::string> relations;
	for (auto t : chosen) {
		relations.push_back(schema.names[t]);
	}
	std::vector<JoinEdge> edges;
	std::vector<std::string> ops {"SELECT", "FROM", "WHERE"};
	std::vector<std::string> operands(relations);
	for (const auto &[a, b] : schema.edges) {
		const bool has_a = std::find(chosen.begin(), chosen.end(), a) != chosen.end();
		const bool has_b = std::find(chosen.begin(), chosen.end(), b) != chosen.end();
		if (has_a && has_b) {
			edges.push_back({schema.names[a], schema.names[b]});
			ops.push_back("=");
			ops.push_back("AND");
			operands.push_back(fmt::format("{}.{}_id", schema.names[a], schema.names[b]));
			operands.push_back(fmt::format("{}.id", schema.names[b]));
		}
	}

	const int filters = static_cast<int>(uniform_index(rng, 2 * m + 1));
	for (int f = 0; f < filters; ++f) {
		const auto &table = relations[uniform_index(rng, relations.size())];
		const std::string op = kFilterOperators[uniform_index(rng, kFilterOperators.size())];
		ops.push_back(op);
		ops.push_back("AND");
		operands.push_back(fmt::format("{}.c{}", table, 1 + uniform_index(rng, 4)));
		const std::size_t constants = op == "BETWEEN" ? 2 : op == "IN" ? 2 + uniform_index(rng, 4) : 1;
		for (std::size_t c = 0; c < constants; ++c) {
			operands.push_back(fmt::format("v{}", uniform_index(rng, 50)));
		}
	}
	const auto aggregates = uniform_index(rng, 4);
	for (std::size_t a = 0; a < aggregates; ++a) {
		ops.push_back(kAggregates[uniform_index(rng, kAggregates.size())]);
		operands.push_back(fmt::format("{}.m{}", relations[uniform_index(rng, relations.size())], 1 + uniform_index(rng, 3)));
	}
	if (aggregates > 0 && uniform_index(rng, 2) == 1) {
		ops.push_back("GROUP BY");
		operands.push_back(fmt::format("{}.g1", relations[uniform_index(rng, relations.size())]));
	}
	return Query(id, std::move(relations), std::move(edges), filters, std::move(ops), std::move(operands));
}

} // namespace

GeneratedWorkload generate_workload(const WorkloadSpec &spec) {
	if (spec.n_tables < 2 || spec.n_tables > 64) {
		throw InvariantError("n_tables must lie in [2, 64]");
	}
	if (spec.n_queries < 1) {
		throw InvariantError("n_queries must be >= 1");
	}
	if (spec.max_relations < 2) {
		throw InvariantError("max_relations must be >= 2");
	}
	Rng rng(derive_seed(spec.seed, {0x3e4f}));
	const auto schema = make_schema(spec, rng);

	std::vector<TableStats> tables;
	for (const auto &name : schema.names) {
		TableStats t;
		t.name = name;
		t.row_count = std::round(log_uniform(rng, 1e3, 1e6));
		t.row_width_bytes = static_cast<double>(16 + 8 * uniform_index(rng, 31));
		t.filter_selectivity = log_uniform(rng, 0.01, 1.0);
		tables.push_back(std::move(t));
	}
	std::vector<JoinSelectivity> selectivities;
	for (const auto &[a, b] : schema.edges) {
		selectivities.push_back({schema.names[a], schema.names[b], log_uniform(rng, 1e-4, 0.5)});
	}

	GeneratedWorkload out {Catalog(std::move(tables), std::move(selectivities)), {}, {}};
	for (std::size_t i = 0; i < spec.n_queries; ++i) {
		out.train.push_back(make_query(fmt::format("q{:03}", i + 1), schema, spec.max_relations, rng));
	}
	for (std::size_t i = 0; i < spec.n_test_queries; ++i) {
		out.test.push_back(make_query(fmt::format("t{:03}", i + 1), schema, spec.max_relations, rng));
	}
	return out;
}

void write_generated(const GeneratedWorkload &generated, const std::filesystem::path &dir) {
	std::filesystem::create_directories(dir);
	auto write = [&](const std::string &name, const nlohmann::ordered_json &doc) {
		std::ofstream os(dir / name, std::ios::binary);
		if (!os) {
			throw Error(fmt::format("{}: cannot open for writing", (dir / name).string()));
		}
		os << doc.dump(2) << '\n';
	};
	write("catalog.json", catalog_to_json(generated.catalog));
	write("train.json", workload_to_json(generated.train));
	write("test.json", workload_to_json(generated.test));
}

} // namespace reload
