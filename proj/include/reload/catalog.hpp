#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace reload {

//! Bit i set <=> the i-th relation of a query (query-local index).
using RelSet = std::uint64_t;

constexpr RelSet singleton(std::size_t i) {
	return RelSet{1} << i;
}

constexpr int popcount(RelSet s) {
	return __builtin_popcountll(s);
}

struct TableStats {
	std::string name;
	double row_count = 1;
	double row_width_bytes = 1;
	//! Fraction of rows surviving the table's base predicates.
	double filter_selectivity = 1.0;
};

struct JoinSelectivity {
	std::string left;
	std::string right;
	double selectivity = 1.0;
};

//! Table statistics and pairwise join selectivities. Immutable once built.
class Catalog {
public:
	Catalog(std::vector<TableStats> tables, std::vector<JoinSelectivity> selectivities,
	        double default_selectivity = 0.1);

	const std::vector<TableStats> &tables() const {
		return tables_;
	}
	std::size_t size() const {
		return tables_.size();
	}
	std::optional<std::size_t> find(std::string_view name) const;
	//! Throws InvariantError for unknown names.
	const TableStats &table(std::string_view name) const;
	//! Selectivity of the unordered pair; default_selectivity when the pair has no entry.
	double selectivity(std::string_view a, std::string_view b) const;
	double default_selectivity() const {
		return default_selectivity_;
	}
	//! Explicit entries, ordered by (min name, max name).
	std::vector<JoinSelectivity> selectivities() const;

private:
	std::vector<TableStats> tables_;
	std::unordered_map<std::string, std::size_t> index_;
	std::map<std::pair<std::string, std::string>, double> selectivities_;
	double default_selectivity_;
};

struct JoinEdge {
	std::string left;
	std::string right;
};

//! A select-project-join query: its join graph and pre-tokenized text.
//!
//! Construction validates the query on its own (≥2 relations, connected join graph,
//! nonempty token bags); load_workload additionally checks names against a catalog.
class Query {
public:
	Query(std::string id, std::vector<std::string> relations, std::vector<JoinEdge> join_edges,
	      int predicate_count, std::vector<std::string> operator_tokens, std::vector<std::string> operand_tokens);

	const std::string &id() const {
		return id_;
	}
	const std::vector<std::string> &relations() const {
		return relations_;
	}
	const std::vector<JoinEdge> &join_edges() const {
		return join_edges_;
	}
	int predicate_count() const {
		return predicate_count_;
	}
	const std::vector<std::string> &operator_tokens() const {
		return operator_tokens_;
	}
	const std::vector<std::string> &operand_tokens() const {
		return operand_tokens_;
	}

	std::size_t size() const {
		return relations_.size();
	}
	RelSet all() const {
		return size() == 64 ? ~RelSet{0} : (singleton(size()) - 1);
	}
	std::optional<std::size_t> index_of(std::string_view relation) const;
	//! Edges as pairs of query-local relation indices (i < j).
	const std::vector<std::pair<std::size_t, std::size_t>> &edge_indices() const {
		return edge_indices_;
	}
	RelSet neighbors(std::size_t i) const {
		return adjacency_[i];
	}
	//! True if some join edge has one endpoint in a and the other in b.
	bool connects(RelSet a, RelSet b) const;
	//! True if the induced join subgraph over s is connected (s nonempty).
	bool is_connected(RelSet s) const;
	std::vector<std::string> relation_names(RelSet s) const;

private:
	std::string id_;
	std::vector<std::string> relations_;
	std::vector<JoinEdge> join_edges_;
	int predicate_count_;
	std::vector<std::string> operator_tokens_;
	std::vector<std::string> operand_tokens_;
	std::vector<std::pair<std::size_t, std::size_t>> edge_indices_;
	std::vector<RelSet> adjacency_;
};

Catalog parse_catalog(const nlohmann::json &doc);
std::vector<Query> parse_workload(const nlohmann::json &doc, const Catalog &catalog);

//! Reads a catalog document (keys `tables`, `selectivities`, optional `default_selectivity`).
Catalog load_catalog(const std::filesystem::path &path);
//! Reads a workload document (key `queries`) and validates it against the catalog.
std::vector<Query> load_workload(const std::filesystem::path &path, const Catalog &catalog);

nlohmann::ordered_json catalog_to_json(const Catalog &catalog);
nlohmann::ordered_json workload_to_json(const std::vector<Query> &queries);

} // namespace reload
