#pragma once

#include "json.hpp"

#include "leafarea/evaluation.hpp"

namespace leafarea {

nlohmann::json report_json(const EvalReport& report);

}  // namespace leafarea
