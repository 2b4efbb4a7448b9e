#pragma once

#include <string>

#include "cknn/estimator.hpp"

namespace cknn {

/// Versioned self-describing JSON document embedding everything needed to
/// reproduce predictions bit-exactly: scaling, metric, k, policy and the full
/// (scaled) training arrays. Files written by a newer format version are
/// rejected on load.
std::string model_to_json(const RegimeModel& model);
RegimeModel model_from_json(const std::string& text);

void save_model(const RegimeModel& model, const std::string& path);
RegimeModel load_model(const std::string& path);

/// Writes content to a temporary sibling then renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace cknn
