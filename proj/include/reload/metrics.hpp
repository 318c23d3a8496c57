#pragma once

#include "reload/expert.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reload {

//! Workload Relative Latency: sum(learned) / sum(expert) over the same query ids.
double wrl(const std::map<std::string, double> &learned, const std::map<std::string, double> &expert);

struct EvalPoint {
	std::uint64_t iteration = 0;
	double latency_ms = 0;
};

struct QueryTrace {
	std::string query_id;
	std::vector<EvalPoint> points;
	ExpertBaseline baseline;
};

enum class Verdict { Superior, Plateau, Rebound };

const char *to_string(Verdict v);

struct RobustnessVerdict {
	Verdict verdict = Verdict::Superior;
	//! Iteration of the first evaluation inside the band, if any.
	std::optional<std::uint64_t> first_superior;
	//! For Rebound: first inferior evaluation after the last superior one.
	std::optional<std::uint64_t> regression;
};

inline constexpr double kDefaultReboundWindow = 0.1;

//! An evaluation is inferior iff its latency exceeds baseline mean + tolerance.
//! Plateau: every evaluation inferior. Rebound: some evaluation before the terminal window
//! (last ceil(window_fraction × n) points) is superior and the whole window is inferior.
RobustnessVerdict classify_query(const QueryTrace &trace, double window_fraction = kDefaultReboundWindow);

//! First evaluated iteration whose workload latency, and that of the next sustain - 1
//! evaluations, is within expert_total + tolerance. nullopt means no convergence.
std::optional<std::uint64_t> convergence_iteration(const std::vector<EvalPoint> &series, double expert_total,
                                                   double tolerance, std::size_t sustain = 3);

} // namespace reload
