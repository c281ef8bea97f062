#pragma once

#include "curvcone/curvop.hpp"
#include "json.hpp"

namespace curvcone {

using json = nlohmann::json;

json to_json(const CurvatureOperator& r);
// Re-validates symmetry and the Bianchi identity.
CurvatureOperator operator_from_json(const json& j);

json to_json(const Mat& m);

}  // namespace curvcone
