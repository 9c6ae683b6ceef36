// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include "f3/numcore/matrix.hpp"

namespace f3 {

/// {"rows": r, "cols": c, "data": [...]} with row-major data. Doubles are
/// written with round-trip precision, so from_json(to_json(m)) == m.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// Plain CSV, one matrix row per line, 17 significant digits.
std::string matrix_to_csv(const Matrix& m);

}  // namespace f3
