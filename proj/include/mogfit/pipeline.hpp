#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mogfit/distribution.hpp"
#include "mogfit/emfit.hpp"
#include "mogfit/error.hpp"
#include "mogfit/json_io.hpp"
#include "mogfit/sizesearch.hpp"
#include "mogfit/transform.hpp"

namespace mogfit {

/// A library error tagged with the pipeline stage that raised it:
/// "request", "precondition", "optimal_power", "pushforward", "fit",
/// "evaluate".
class StageError : public Error {
 public:
  StageError(ErrorKind kind, std::string stage, const std::string& what)
      : Error(kind, what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Runs `body`, re-throwing any library error as a StageError for `stage`.
template <class F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(e.kind(), stage, e.what());
  }
}

enum class TransformMode { none, automatic, explicit_chain };
enum class FitMode { em, fast_two, size_search };

struct PipelineRequest {
  explicit PipelineRequest(DistributionSpec spec) : spec(std::move(spec)) {}

  DistributionSpec spec;
  std::optional<Bounds> bounds;
  TransformMode transform = TransformMode::none;
  /// Used with TransformMode::explicit_chain.
  TransformChain chain;
  FitMode fit = FitMode::em;
  int m = 1;
  /// Required for FitMode::size_search.
  std::optional<SizeSearchConfig> search;
  /// Its quadrature settings apply to every stage.
  EmConfig em_cfg;
  PowerSearchConfig power;
  bool round_power = false;

  void validate() const;
};

/// Parses a request document. Quadrature fields absent from the request
/// take their values from `quadrature`.
PipelineRequest request_from_json(const Json& j,
                                  const QuadratureConfig& quadrature = {});

struct Diagnostic {
  std::string name;
  /// Absent when the quantity is undefined or could not be computed.
  std::optional<double> value;
};

struct PipelineResult {
  TransformChain chain_used;
  /// Power of the Box-Cox step in chain_used (after rounding, if any).
  std::optional<double> p_star;
  /// The searched optimum before rounding.
  std::optional<double> p_searched;
  std::map<int, FitReport> fit_reports;
  std::optional<int> chosen_m;
  /// entropy, gap_before, gap_after, then stage-specific values.
  std::vector<Diagnostic> diagnostics;
  std::vector<std::string> flags;

  std::optional<double> diagnostic(const std::string& name) const;
};

Json to_json(const PipelineResult& result);

/// precondition -> optimal power (rounded on request) -> pushforward -> fit.
/// Errors surface as StageError.
PipelineResult run_pipeline(const PipelineRequest& req);

/// The automatic transformation on its own.
struct AutoTransform {
  TransformChain precondition;
  TransformChain chain;
  PowerSearchResult search;
  /// Power used in `chain`.
  double p = 0.0;
};

AutoTransform auto_transform(const DistributionSpec& spec,
                             const std::optional<Bounds>& bounds, bool round,
                             const PowerSearchConfig& power,
                             const QuadratureConfig& cfg);

/// Document for `mogfit transform`.
Json transform_summary(const DistributionSpec& spec,
                       const std::optional<Bounds>& bounds, bool round,
                       const PowerSearchConfig& power,
                       const QuadratureConfig& cfg);

/// Entropy, moments, support, quantiles and the moment-matching Gaussian.
/// Quantities that cannot be computed are null and explained in "notes".
Json analyze(const DistributionSpec& spec, int max_order,
             const QuadratureConfig& cfg);

/// Body {"points": [...], "tail_policy"?, "n_equiv"?} to a spline spec.
Json assess_spline(const Json& body);

/// Body {"spec", "grid"?, "chain"?, "mixture"?} to aligned plotting arrays.
/// The mixture, if any, models chain(X) and is mapped back to x.
Json evaluate(const Json& body, const QuadratureConfig& cfg);

}  // namespace mogfit
