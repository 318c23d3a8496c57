#include "reload/plan.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace reload {

const char *to_string(JoinOperator op) {
	switch (op) {
	case JoinOperator::Hash:
		return "Hash";
	case JoinOperator::Merge:
		return "Merge";
	case JoinOperator::NestedLoop:
		return "NestedLoop";
	}
	return "?";
}

PlanNode::PlanNode(Private, std::size_t relation) : relation_(relation), relations_(singleton(relation)) {
}

PlanNode::PlanNode(Private, PlanPtr left, PlanPtr right, JoinOperator op)
    : left_(std::move(left)), right_(std::move(right)), op_(op) {
	relations_ = left_->relations_ | right_->relations_;
	join_count_ = left_->join_count_ + right_->join_count_ + 1;
	depth_ = std::max(left_->depth_, right_->depth_) + 1;
	for (std::size_t i = 0; i < operator_counts_.size(); ++i) {
		operator_counts_[i] = left_->operator_counts_[i] + right_->operator_counts_[i];
	}
	operator_counts_[static_cast<std::size_t>(op)] += 1;
}

PlanPtr PlanNode::scan(std::size_t relation) {
	if (relation >= 64) {
		throw InvariantError("scan relation index out of range");
	}
	return std::make_shared<const PlanNode>(Private {}, relation);
}

PlanPtr PlanNode::join(PlanPtr left, PlanPtr right, JoinOperator op) {
	if (!left || !right) {
		throw InvariantError("join child is null");
	}
	if (left->relations() & right->relations()) {
		throw InvariantError("join children share a relation");
	}
	return std::make_shared<const PlanNode>(Private {}, std::move(left), std::move(right), op);
}

bool same_plan(const PlanNode &a, const PlanNode &b) {
	if (a.is_scan() || b.is_scan()) {
		return a.is_scan() && b.is_scan() && a.relation() == b.relation();
	}
	return a.op() == b.op() && a.relations() == b.relations() && same_plan(*a.left(), *b.left()) &&
	       same_plan(*a.right(), *b.right());
}

std::string to_string(const PlanNode &plan, const Query &query) {
	if (plan.is_scan()) {
		return plan.relation() < query.size() ? query.relations()[plan.relation()] : fmt::format("#{}", plan.relation());
	}
	return fmt::format("({} {} {})", to_string(plan.op()), to_string(*plan.left(), query),
	                   to_string(*plan.right(), query));
}

void validate_plan(const PlanNode &plan, const Query &query) {
	if (plan.relations() != query.all()) {
		throw InvariantError(fmt::format("plan does not cover exactly the relations of query '{}'", query.id()));
	}
	for (const auto *node : join_nodes(plan)) {
		if (!query.connects(node->left()->relations(), node->right()->relations())) {
			throw InvariantError(fmt::format("plan for query '{}' contains a cross product", query.id()));
		}
	}
}

std::vector<const PlanNode *> join_nodes(const PlanNode &plan) {
	std::vector<const PlanNode *> out;
	std::vector<const PlanNode *> stack {&plan};
	while (!stack.empty()) {
		const auto *node = stack.back();
		stack.pop_back();
		if (node->is_scan()) {
			continue;
		}
		out.push_back(node);
		stack.push_back(node->right().get());
		stack.push_back(node->left().get());
	}
	return out;
}

RelSet PlanState::relations() const {
	RelSet s = 0;
	for (const auto &f : fragments) {
		s |= f->relations();
	}
	return s;
}

const PlanPtr &PlanState::plan() const {
	if (!is_terminal()) {
		throw InvariantError(fmt::format("state of query '{}' is not terminal", query_id));
	}
	return fragments.front();
}

bool operator==(const PlanState &a, const PlanState &b) {
	if (a.query_id != b.query_id || a.fragments.size() != b.fragments.size()) {
		return false;
	}
	for (std::size_t i = 0; i < a.fragments.size(); ++i) {
		if (!same_plan(*a.fragments[i], *b.fragments[i])) {
			return false;
		}
	}
	return true;
}

PlanState initial_state(const Query &query) {
	PlanState state;
	state.query_id = query.id();
	state.fragments.reserve(query.size());
	for (std::size_t i = 0; i < query.size(); ++i) {
		state.fragments.push_back(PlanNode::scan(i));
	}
	return state;
}

std::vector<Action> legal_actions(const PlanState &state, const Query &query, PlanShape shape) {
	std::vector<Action> out;
	if (state.fragments.size() < 2) {
		return out;
	}
	const auto n = state.fragments.size();
	std::size_t composite = n;
	if (shape == PlanShape::LeftDeep) {
		for (std::size_t i = 0; i < n; ++i) {
			if (state.fragments[i]->is_join()) {
				composite = i;
				break;
			}
		}
	}
	for (std::size_t l = 0; l < n; ++l) {
		if (composite < n && l != composite) {
			continue;
		}
		for (std::size_t r = 0; r < n; ++r) {
			if (l == r) {
				continue;
			}
			if (shape == PlanShape::LeftDeep && !state.fragments[r]->is_scan()) {
				continue;
			}
			if (!query.connects(state.fragments[l]->relations(), state.fragments[r]->relations())) {
				continue;
			}
			for (auto op : kJoinOperators) {
				out.push_back({l, r, op});
			}
		}
	}
	return out;
}

PlanState apply_action(const PlanState &state, const Action &action, const Query &query) {
	const auto n = state.fragments.size();
	if (action.left_fragment >= n || action.right_fragment >= n) {
		throw InvariantError(fmt::format("illegal action: fragment index out of range ({} fragments)", n));
	}
	if (action.left_fragment == action.right_fragment) {
		throw InvariantError("illegal action: fragments overlap (same fragment on both sides)");
	}
	const auto &left = state.fragments[action.left_fragment];
	const auto &right = state.fragments[action.right_fragment];
	if (left->relations() & right->relations()) {
		throw InvariantError("illegal action: fragments overlap");
	}
	if (!query.connects(left->relations(), right->relations())) {
		throw InvariantError("illegal action: no join edge connects the fragments (cross product)");
	}
	PlanState next;
	next.query_id = state.query_id;
	next.fragments.reserve(n - 1);
	const auto keep = std::min(action.left_fragment, action.right_fragment);
	const auto drop = std::max(action.left_fragment, action.right_fragment);
	for (std::size_t i = 0; i < n; ++i) {
		if (i == keep) {
			next.fragments.push_back(PlanNode::join(left, right, action.op));
		} else if (i != drop) {
			next.fragments.push_back(state.fragments[i]);
		}
	}
	return next;
}

} // namespace reload
