#pragma once

#include <string>

#include "fowlerlab/exponents.hpp"
#include "fowlerlab/potentials.hpp"
#include "json.hpp"

namespace fl {

// Non-finite numbers become "inf", "-inf" or null.
nlohmann::json number_json(double x);

nlohmann::json spec_to_json(const PotentialSpec& spec);
// Accepts {"family", "q", "delta", "k": {...}, "q2", "delta2", "k2": {...}}; missing keys keep defaults.
PotentialSpec spec_from_json(const nlohmann::json& j);

nlohmann::json exponents_to_json(const ExponentTable& t);
nlohmann::json hypotheses_to_json(const HypothesisReport& r);

}  // namespace fl
