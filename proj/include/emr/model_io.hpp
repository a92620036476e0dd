#pragma once

#include "emr/emr.hpp"

#include <string>

namespace emr {

inline constexpr const char* kModelSchema = "emrkit.model";
inline constexpr int kModelSchemaVersion = 1;

/// JSON text of a fitted model. Matrices are stored row-major with their shapes; doubles
/// are printed with round-trip precision, so save followed by load is lossless.
std::string model_to_json(const EMRModel& model);
EMRModel model_from_json(const std::string& text);

void save_model(const EMRModel& model, const std::string& path);
EMRModel load_model(const std::string& path);

}  // namespace emr
