#pragma once

#include "reload/catalog.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace reload {

enum class SchemaShape { Star, Chain, Snowflake };

const char *to_string(SchemaShape shape);
//! Accepts star | chain | snowflake.
SchemaShape parse_schema_shape(std::string_view name);

struct WorkloadSpec {
	std::size_t n_tables = 6;
	SchemaShape shape = SchemaShape::Star;
	std::size_t n_queries = 10;
	std::size_t n_test_queries = 3;
	std::uint64_t seed = 0;
	//! Queries never join more relations than this.
	std::size_t max_relations = 12;
};

struct GeneratedWorkload {
	Catalog catalog;
	std::vector<Query> train;
	std::vector<Query> test;
};

//! Synthetic schema and queries, deterministic per seed.
//!
//! Row counts are log-uniform in [1e3, 1e6] and join selectivities log-uniform in
//! [1e-4, 0.5]. Each query is a connected subgraph of the schema with 2..n_tables
//! relations; its token bags grow with the join structure plus random filters and
//! aggregates, so token-based and cardinality-based complexity scores disagree.
GeneratedWorkload generate_workload(const WorkloadSpec &spec);

//! Writes catalog.json, train.json, and test.json into dir (created if missing).
void write_generated(const GeneratedWorkload &generated, const std::filesystem::path &dir);

} // namespace reload
