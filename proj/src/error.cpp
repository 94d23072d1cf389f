#include "mogfit/error.hpp"

#include <sstream>

namespace mogfit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::domain: return "domain";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "unknown";
}

namespace {
std::string death_message(std::size_t component, double weight) {
  std::ostringstream os;
  os << "component " << component << " died (weight " << weight
     << " below 1e-12)";
  return os.str();
}
}  // namespace

ComponentDeathError::ComponentDeathError(std::size_t component, double weight)
    : DegenerateError(death_message(component, weight)),
      component_(component),
      weight_(weight) {}

}  // namespace mogfit
