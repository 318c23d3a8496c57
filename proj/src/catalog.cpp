#include "reload/catalog.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace reload {

namespace {

std::pair<std::string, std::string> ordered_pair(std::string_view a, std::string_view b) {
	if (b < a) {
		return {std::string(b), std::string(a)};
	}
	return {std::string(a), std::string(b)};
}

bool in_unit_interval(double x) {
	return x > 0.0 && x <= 1.0;
}

} // namespace

Catalog::Catalog(std::vector<TableStats> tables, std::vector<JoinSelectivity> selectivities,
                 double default_selectivity)
    : tables_(std::move(tables)), default_selectivity_(default_selectivity) {
	if (tables_.empty()) {
		throw InvariantError("catalog has no tables");
	}
	if (tables_.size() > 64) {
		throw InvariantError("catalog has more than 64 tables");
	}
	if (!in_unit_interval(default_selectivity_)) {
		throw InvariantError(fmt::format("selectivity out of range: default_selectivity = {}", default_selectivity_));
	}
	for (std::size_t i = 0; i < tables_.size(); ++i) {
		const auto &t = tables_[i];
		if (t.name.empty()) {
			throw InvariantError(fmt::format("table {} has an empty name", i));
		}
		if (!index_.emplace(t.name, i).second) {
			throw InvariantError(fmt::format("duplicate table '{}'", t.name));
		}
		if (!(t.row_count >= 1)) {
			throw InvariantError(fmt::format("table '{}': row_count must be >= 1", t.name));
		}
		if (!(t.row_width_bytes >= 1)) {
			throw InvariantError(fmt::format("table '{}': row_width_bytes must be >= 1", t.name));
		}
		if (!in_unit_interval(t.filter_selectivity)) {
			throw InvariantError(fmt::format("table '{}': filter_selectivity out of range", t.name));
		}
	}
	for (const auto &s : selectivities) {
		if (!find(s.left) || !find(s.right)) {
			throw InvariantError(fmt::format("selectivity entry ({}, {}) references an unknown table", s.left, s.right));
		}
		if (s.left == s.right) {
			throw InvariantError(fmt::format("selectivity entry ({}, {}) is a self-join", s.left, s.right));
		}
		if (!in_unit_interval(s.selectivity)) {
			throw InvariantError(
			    fmt::format("selectivity out of range: ({}, {}) = {}", s.left, s.right, s.selectivity));
		}
		if (!selectivities_.emplace(ordered_pair(s.left, s.right), s.selectivity).second) {
			throw InvariantError(fmt::format("duplicate selectivity entry ({}, {})", s.left, s.right));
		}
	}
}

std::optional<std::size_t> Catalog::find(std::string_view name) const {
	auto it = index_.find(std::string(name));
	if (it == index_.end()) {
		return std::nullopt;
	}
	return it->second;
}

const TableStats &Catalog::table(std::string_view name) const {
	auto idx = find(name);
	if (!idx) {
		throw InvariantError(fmt::format("unknown table '{}'", name));
	}
	return tables_[*idx];
}

double Catalog::selectivity(std::string_view a, std::string_view b) const {
	auto it = selectivities_.find(ordered_pair(a, b));
	return it == selectivities_.end() ? default_selectivity_ : it->second;
}

std::vector<JoinSelectivity> Catalog::selectivities() const {
	std::vector<JoinSelectivity> out;
	out.reserve(selectivities_.size());
	for (const auto &[key, sel] : selectivities_) {
		out.push_back({key.first, key.second, sel});
	}
	return out;
}

Query::Query(std::string id, std::vector<std::string> relations, std::vector<JoinEdge> join_edges,
             int predicate_count, std::vector<std::string> operator_tokens, std::vector<std::string> operand_tokens)
    : id_(std::move(id)), relations_(std::move(relations)), join_edges_(std::move(join_edges)),
      predicate_count_(predicate_count), operator_tokens_(std::move(operator_tokens)),
      operand_tokens_(std::move(operand_tokens)) {
	if (id_.empty()) {
		throw InvariantError("query id is empty");
	}
	if (relations_.size() < 2) {
		throw InvariantError(fmt::format("query '{}': needs at least 2 relations", id_));
	}
	if (relations_.size() > 64) {
		throw InvariantError(fmt::format("query '{}': more than 64 relations", id_));
	}
	std::set<std::string> seen;
	for (const auto &r : relations_) {
		if (!seen.insert(r).second) {
			throw InvariantError(fmt::format("query '{}': relation '{}' listed twice", id_, r));
		}
	}
	if (predicate_count_ < 0) {
		throw InvariantError(fmt::format("query '{}': negative predicate_count", id_));
	}
	if (operator_tokens_.empty() || operand_tokens_.empty()) {
		throw InvariantError(fmt::format("query '{}': operator and operand token bags must be nonempty", id_));
	}

	adjacency_.assign(relations_.size(), 0);
	std::set<std::pair<std::size_t, std::size_t>> unique_edges;
	for (const auto &e : join_edges_) {
		auto l = index_of(e.left);
		auto r = index_of(e.right);
		if (!l || !r) {
			throw InvariantError(
			    fmt::format("query '{}': join edge ({}, {}) references a relation not in the query", id_, e.left, e.right));
		}
		if (*l == *r) {
			throw InvariantError(fmt::format("query '{}': self-join edge on '{}'", id_, e.left));
		}
		auto key = std::minmax(*l, *r);
		if (unique_edges.insert(key).second) {
			edge_indices_.push_back(key);
		}
		adjacency_[*l] |= singleton(*r);
		adjacency_[*r] |= singleton(*l);
	}
	if (!is_connected(all())) {
		throw InvariantError(fmt::format("query '{}': disconnected join graph", id_));
	}
}

std::optional<std::size_t> Query::index_of(std::string_view relation) const {
	for (std::size_t i = 0; i < relations_.size(); ++i) {
		if (relations_[i] == relation) {
			return i;
		}
	}
	return std::nullopt;
}

bool Query::connects(RelSet a, RelSet b) const {
	for (std::size_t i = 0; i < relations_.size(); ++i) {
		if ((a & singleton(i)) && (adjacency_[i] & b)) {
			return true;
		}
	}
	return false;
}

bool Query::is_connected(RelSet s) const {
	if (s == 0) {
		return false;
	}
	RelSet reached = s & (~s + 1); // lowest bit
	RelSet frontier = reached;
	while (frontier) {
		RelSet next = 0;
		for (std::size_t i = 0; i < relations_.size(); ++i) {
			if (frontier & singleton(i)) {
				next |= adjacency_[i];
			}
		}
		next &= s & ~reached;
		reached |= next;
		frontier = next;
	}
	return reached == s;
}

std::vector<std::string> Query::relation_names(RelSet s) const {
	std::vector<std::string> out;
	for (std::size_t i = 0; i < relations_.size(); ++i) {
		if (s & singleton(i)) {
			out.push_back(relations_[i]);
		}
	}
	return out;
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

const json &require(const json &obj, const char *key, const std::string &where) {
	if (!obj.is_object()) {
		throw ParseError(fmt::format("{}: expected an object", where));
	}
	auto it = obj.find(key);
	if (it == obj.end()) {
		throw ParseError(fmt::format("{}: missing field '{}'", where, key));
	}
	return *it;
}

double number_field(const json &obj, const char *key, const std::string &where) {
	const auto &v = require(obj, key, where);
	if (!v.is_number()) {
		throw ParseError(fmt::format("{}.{}: expected a number", where, key));
	}
	return v.get<double>();
}

std::string string_field(const json &obj, const char *key, const std::string &where) {
	const auto &v = require(obj, key, where);
	if (!v.is_string()) {
		throw ParseError(fmt::format("{}.{}: expected a string", where, key));
	}
	return v.get<std::string>();
}

std::vector<std::string> string_list(const json &v, const std::string &where) {
	if (!v.is_array()) {
		throw ParseError(fmt::format("{}: expected an array of strings", where));
	}
	std::vector<std::string> out;
	for (std::size_t i = 0; i < v.size(); ++i) {
		if (!v[i].is_string()) {
			throw ParseError(fmt::format("{}[{}]: expected a string", where, i));
		}
		out.push_back(v[i].get<std::string>());
	}
	return out;
}

const json &array_field(const json &obj, const char *key, const std::string &where) {
	const auto &v = require(obj, key, where);
	if (!v.is_array()) {
		throw ParseError(fmt::format("{}.{}: expected an array", where, key));
	}
	return v;
}

json read_document(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ParseError(fmt::format("{}: cannot open file", path.string()));
	}
	try {
		return json::parse(in);
	} catch (const json::parse_error &e) {
		// nlohmann reports "at line L, column C" in its message
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	}
}

} // namespace

Catalog parse_catalog(const json &doc) {
	std::vector<TableStats> tables;
	const auto &tables_doc = array_field(doc, "tables", "catalog");
	for (std::size_t i = 0; i < tables_doc.size(); ++i) {
		auto where = fmt::format("tables[{}]", i);
		const auto &t = tables_doc[i];
		TableStats stats;
		stats.name = string_field(t, "name", where);
		stats.row_count = number_field(t, "row_count", where);
		stats.row_width_bytes = number_field(t, "row_width_bytes", where);
		stats.filter_selectivity = t.contains("filter_selectivity") ? number_field(t, "filter_selectivity", where) : 1.0;
		tables.push_back(std::move(stats));
	}
	std::vector<JoinSelectivity> sels;
	if (doc.contains("selectivities")) {
		const auto &sel_doc = array_field(doc, "selectivities", "catalog");
		for (std::size_t i = 0; i < sel_doc.size(); ++i) {
			auto where = fmt::format("selectivities[{}]", i);
			const auto &s = sel_doc[i];
			sels.push_back({string_field(s, "left", where), string_field(s, "right", where),
			                number_field(s, "selectivity", where)});
		}
	}
	double def = doc.contains("default_selectivity") ? number_field(doc, "default_selectivity", "catalog") : 0.1;
	return Catalog(std::move(tables), std::move(sels), def);
}

std::vector<Query> parse_workload(const json &doc, const Catalog &catalog) {
	std::vector<Query> out;
	std::set<std::string> ids;
	const auto &queries = array_field(doc, "queries", "workload");
	for (std::size_t i = 0; i < queries.size(); ++i) {
		auto where = fmt::format("queries[{}]", i);
		const auto &q = queries[i];
		auto id = string_field(q, "id", where);
		auto relations = string_list(require(q, "relations", where), where + ".relations");
		for (const auto &r : relations) {
			if (!catalog.find(r)) {
				throw InvariantError(fmt::format("{} ('{}'): unknown table '{}'", where, id, r));
			}
		}
		std::vector<JoinEdge> edges;
		const auto &joins = array_field(q, "joins", where);
		for (std::size_t j = 0; j < joins.size(); ++j) {
			auto pair = string_list(joins[j], fmt::format("{}.joins[{}]", where, j));
			if (pair.size() != 2) {
				throw ParseError(fmt::format("{}.joins[{}]: expected a pair of table names", where, j));
			}
			for (const auto &r : pair) {
				if (!catalog.find(r)) {
					throw InvariantError(fmt::format("{} ('{}'): join references unknown table '{}'", where, id, r));
				}
			}
			edges.push_back({pair[0], pair[1]});
		}
		int predicates = q.contains("predicate_count") ? static_cast<int>(number_field(q, "predicate_count", where)) : 0;
		auto ops = string_list(require(q, "operator_tokens", where), where + ".operator_tokens");
		auto operands = string_list(require(q, "operand_tokens", where), where + ".operand_tokens");
		if (!ids.insert(id).second) {
			throw InvariantError(fmt::format("{}: duplicate query id '{}'", where, id));
		}
		out.emplace_back(std::move(id), std::move(relations), std::move(edges), predicates, std::move(ops),
		                 std::move(operands));
	}
	return out;
}

Catalog load_catalog(const std::filesystem::path &path) {
	auto doc = read_document(path);
	try {
		return parse_catalog(doc);
	} catch (const ParseError &e) {
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	} catch (const InvariantError &e) {
		throw InvariantError(fmt::format("{}: {}", path.string(), e.what()));
	}
}

std::vector<Query> load_workload(const std::filesystem::path &path, const Catalog &catalog) {
	auto doc = read_document(path);
	try {
		return parse_workload(doc, catalog);
	} catch (const ParseError &e) {
		throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
	} catch (const InvariantError &e) {
		throw InvariantError(fmt::format("{}: {}", path.string(), e.what()));
	}
}

nlohmann::ordered_json catalog_to_json(const Catalog &catalog) {
	nlohmann::ordered_json doc;
	doc["tables"] = nlohmann::ordered_json::array();
	for (const auto &t : catalog.tables()) {
		nlohmann::ordered_json row;
		row["name"] = t.name;
		row["row_count"] = t.row_count;
		row["row_width_bytes"] = t.row_width_bytes;
		row["filter_selectivity"] = t.filter_selectivity;
		doc["tables"].push_back(std::move(row));
	}
	doc["selectivities"] = nlohmann::ordered_json::array();
	for (const auto &s : catalog.selectivities()) {
		doc["selectivities"].push_back({{"left", s.left}, {"right", s.right}, {"selectivity", s.selectivity}});
	}
	doc["default_selectivity"] = catalog.default_selectivity();
	return doc;
}

nlohmann::ordered_json workload_to_json(const std::vector<Query> &queries) {
	nlohmann::ordered_json doc;
	doc["queries"] = nlohmann::ordered_json::array();
	for (const auto &q : queries) {
		nlohmann::ordered_json row;
		row["id"] = q.id();
		row["relations"] = q.relations();
		row["joins"] = nlohmann::ordered_json::array();
		for (const auto &e : q.join_edges()) {
			row["joins"].push_back({e.left, e.right});
		}
		row["predicate_count"] = q.predicate_count();
		row["operator_tokens"] = q.operator_tokens();
		row["operand_tokens"] = q.operand_tokens();
		doc["queries"].push_back(std::move(row));
	}
	return doc;
}

} // namespace reload
