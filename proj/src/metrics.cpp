#include "reload/metrics.hpp"

#include "reload/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace reload {

double wrl(const std::map<std::string, double> &learned, const std::map<std::string, double> &expert) {
	if (learned.empty()) {
		throw InvariantError("WRL of an empty workload");
	}
	if (learned.size() != expert.size()) {
		throw InvariantError("WRL inputs cover different queries");
	}
	double num = 0.0;
	double den = 0.0;
	for (auto it = learned.begin(), jt = expert.begin(); it != learned.end(); ++it, ++jt) {
		if (it->first != jt->first) {
			throw InvariantError(fmt::format("WRL inputs cover different queries ('{}' vs '{}')", it->first, jt->first));
		}
		if (!(it->second > 0.0) || !(jt->second > 0.0)) {
			throw InvariantError(fmt::format("WRL needs positive latencies (query '{}')", it->first));
		}
		num += it->second;
		den += jt->second;
	}
	return num / den;
}

const char *to_string(Verdict v) {
	switch (v) {
	case Verdict::Superior:
		return "superior";
	case Verdict::Plateau:
		return "plateau";
	case Verdict::Rebound:
		return "rebound";
	}
	return "?";
}

RobustnessVerdict classify_query(const QueryTrace &trace, double window_fraction) {
	const auto n = trace.points.size();
	if (n < 2) {
		throw InvariantError(fmt::format("trace of query '{}' needs at least 2 evaluations", trace.query_id));
	}
	if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
		throw InvariantError("window_fraction must lie in (0, 1]");
	}
	for (std::size_t i = 0; i < n; ++i) {
		if (!(trace.points[i].latency_ms > 0.0)) {
			throw InvariantError(fmt::format("trace of query '{}' has a non-positive latency", trace.query_id));
		}
		if (i > 0 && trace.points[i].iteration <= trace.points[i - 1].iteration) {
			throw InvariantError(fmt::format("trace of query '{}' is not strictly increasing", trace.query_id));
		}
	}
	const double upper = trace.baseline.upper_band();
	auto inferior = [&](std::size_t i) { return trace.points[i].latency_ms > upper; };

	RobustnessVerdict v;
	std::optional<std::size_t> last_superior;
	for (std::size_t i = 0; i < n; ++i) {
		if (!inferior(i)) {
			if (!v.first_superior) {
				v.first_superior = trace.points[i].iteration;
			}
			last_superior = i;
		}
	}
	if (!last_superior) {
		v.verdict = Verdict::Plateau;
		return v;
	}
	auto window = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n)));
	window = std::clamp<std::size_t>(window, 1, n - 1);
	const auto window_start = n - window;
	if (*last_superior < window_start) {
		v.verdict = Verdict::Rebound;
		v.regression = trace.points[*last_superior + 1].iteration;
	}
	return v;
}

std::optional<std::uint64_t> convergence_iteration(const std::vector<EvalPoint> &series, double expert_total,
                                                   double tolerance, std::size_t sustain) {
	if (sustain == 0) {
		throw InvariantError("sustain must be at least 1");
	}
	const double threshold = expert_total + tolerance;
	std::size_t run = 0;
	for (std::size_t i = 0; i < series.size(); ++i) {
		run = series[i].latency_ms <= threshold ? run + 1 : 0;
		if (run == sustain) {
			return series[i + 1 - sustain].iteration;
		}
	}
	return std::nullopt;
}

} // namespace reload
