#pragma once

#include "json.hpp"

#include "evload/lstm.hpp"

namespace evload::detail {

// Shared by the standalone model serializer and the training checkpoint.
nlohmann::ordered_json model_to_json(const ModelParams& params);
ModelParams model_from_json(const nlohmann::json& j);

}  // namespace evload::detail
