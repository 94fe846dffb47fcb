#pragma once

#include "relu_optset/core.hpp"
#include "relu_optset/optimal_set.hpp"
#include "relu_optset/pruning.hpp"
#include "relu_optset/reformulation.hpp"
#include "relu_optset/sensitivity.hpp"
#include "relu_optset/solver.hpp"

#include <json.hpp>

#include <string>

namespace relu_optset {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "relu-optset/1";

// Matrices are {"rows": r, "cols": c, "data": [row-major entries]}.
json to_json(const Mat& M);
json to_json(const Vec& v);
json to_json(const IndexSet& s);
Mat mat_from_json(const json& j);
Vec vec_from_json(const json& j);

json to_json(const BlockPartition& p);
BlockPartition partition_from_json(const json& j);

json to_json(const CglProblem& p);
CglProblem problem_from_json(const json& j);

json weights_to_json(const CglProblem& p, const Weights& w);
Weights weights_from_json(const json& j);

json to_json(const DualCertificate& d);
DualCertificate dual_from_json(const json& j);

json to_json(const KktReport& r);
json to_json(const SolverOptions& o);
SolverOptions solver_options_from_json(const json& j);
json to_json(const SolveResult& r);

json to_json(const PatternSet& ps);
PatternSet pattern_set_from_json(const json& j);

json to_json(const ReluNetwork& net);

json to_json(const OptimalSetDescription& d);
json to_json(const UniquenessCertificate& c);
json to_json(const GgpResult& g);
json to_json(const PathReport& r);
json to_json(const PruneTrace& t);
json to_json(const SensitivityReport& r);

// Wraps a payload with the schema version and a kind tag.
json envelope(const std::string& kind, json payload);

}  // namespace relu_optset
