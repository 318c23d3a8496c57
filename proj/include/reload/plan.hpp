#pragma once

#include "reload/catalog.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace reload {

//! Enumeration order doubles as the expert's operator tie-break order.
enum class JoinOperator : std::uint8_t { Hash = 0, Merge = 1, NestedLoop = 2 };

inline constexpr std::array<JoinOperator, 3> kJoinOperators = {JoinOperator::Hash, JoinOperator::Merge,
                                                               JoinOperator::NestedLoop};

const char *to_string(JoinOperator op);

class PlanNode;
using PlanPtr = std::shared_ptr<const PlanNode>;

//! Binary join tree node. Subtrees are shared between plans, never mutated.
class PlanNode {
public:
	static PlanPtr scan(std::size_t relation);
	//! Throws InvariantError if the children's relation sets overlap.
	static PlanPtr join(PlanPtr left, PlanPtr right, JoinOperator op);

	bool is_scan() const {
		return !left_;
	}
	bool is_join() const {
		return static_cast<bool>(left_);
	}
	//! Query-local relation index of a scan.
	std::size_t relation() const {
		return relation_;
	}
	const PlanPtr &left() const {
		return left_;
	}
	const PlanPtr &right() const {
		return right_;
	}
	JoinOperator op() const {
		return op_;
	}
	RelSet relations() const {
		return relations_;
	}
	int join_count() const {
		return join_count_;
	}
	//! Height of the tree; a scan has depth 0.
	int depth() const {
		return depth_;
	}
	//! Join operator counts indexed by JoinOperator.
	const std::array<int, 3> &operator_counts() const {
		return operator_counts_;
	}

	struct Private {};
	PlanNode(Private, std::size_t relation);
	PlanNode(Private, PlanPtr left, PlanPtr right, JoinOperator op);

private:
	std::size_t relation_ = 0;
	PlanPtr left_;
	PlanPtr right_;
	JoinOperator op_ = JoinOperator::Hash;
	RelSet relations_ = 0;
	int join_count_ = 0;
	int depth_ = 0;
	std::array<int, 3> operator_counts_ {};
};

//! Structural equality (same shape, operators, and leaves).
bool same_plan(const PlanNode &a, const PlanNode &b);

//! S-expression rendering, e.g. "(Hash (Merge a b) c)".
std::string to_string(const PlanNode &plan, const Query &query);

//! Checks that the plan covers exactly the query's relations and that every join is
//! connected by a join edge. Throws InvariantError naming the violation.
void validate_plan(const PlanNode &plan, const Query &query);

//! Pre-order list of join nodes (root first).
std::vector<const PlanNode *> join_nodes(const PlanNode &plan);

enum class PlanShape { Bushy, LeftDeep };

struct Action {
	std::size_t left_fragment = 0;
	std::size_t right_fragment = 0;
	JoinOperator op = JoinOperator::Hash;

	bool operator==(const Action &) const = default;
};

//! A partial plan: the fragments joined so far plus singleton scans of the rest.
struct PlanState {
	std::string query_id;
	std::vector<PlanPtr> fragments;

	bool is_terminal() const {
		return fragments.size() == 1;
	}
	RelSet relations() const;
	//! The finished plan; throws InvariantError if the state is not terminal.
	const PlanPtr &plan() const;
};

bool operator==(const PlanState &a, const PlanState &b);

PlanState initial_state(const Query &query);

//! Every connected ordered fragment pair crossed with every join operator.
//! Empty for terminal states.
std::vector<Action> legal_actions(const PlanState &state, const Query &query, PlanShape shape = PlanShape::Bushy);

//! Replaces the two fragments by their join: the result takes the lower of the two
//! positions, the other fragment is erased. Throws InvariantError on illegal actions.
PlanState apply_action(const PlanState &state, const Action &action, const Query &query);

} // namespace reload
