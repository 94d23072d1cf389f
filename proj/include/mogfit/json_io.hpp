#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mogfit/distribution.hpp"
#include "mogfit/emfit.hpp"
#include "mogfit/mixture.hpp"
#include "mogfit/quadrature.hpp"
#include "mogfit/transform.hpp"
#include "mogfit/transform_chain.hpp"

namespace mogfit {

using Json = nlohmann::json;

/// Parses JSON text. Malformed input throws ValidationError naming the line
/// and column.
Json parse_json(const std::string& text);

/// Compact, key-sorted text with shortest round-trip numbers and a trailing
/// newline. Non-finite numbers come out as null.
std::string dump_canonical(const Json& j);

Json to_json(const DistributionSpec& spec);
DistributionSpec spec_from_json(const Json& j);

Json to_json(const GaussianMixture& gm);
GaussianMixture mixture_from_json(const Json& j);

Json to_json(const TransformChain& chain);
TransformChain chain_from_json(const Json& j);

Json to_json(const FitReport& report);
FitReport report_from_json(const Json& j);

Json to_json(const QuadratureConfig& cfg);
/// Fields present in `j` override `base`.
QuadratureConfig quadrature_from_json(const Json& j, QuadratureConfig base);

Json to_json(const EmConfig& cfg);
EmConfig em_config_from_json(const Json& j, EmConfig base);

PowerSearchConfig power_search_from_json(const Json& j, PowerSearchConfig base);

/// [lo, hi]; null or "inf" for an infinite upper end.
Bounds bounds_from_json(const Json& j);

}  // namespace mogfit
