#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lipschitz_lr/harness.hpp"

namespace lipschitz_lr {

/// Configurations for the CSVs shipped in data/.
///
///  iris          raw features plus an intercept column, softmax regression
///  digits        mean-centered pixels / 255, softmax regression
///  breast_cancer sum-to-one features with the intercept scaled alongside
///  two_moons     standardized 2-d points, 16-unit ReLU MLP, batch 32
///  linreg_*      sum-to-one least squares with an intercept column
inline std::vector<std::string> preset_names() {
    return {"iris", "digits", "breast_cancer", "two_moons", "linreg_small", "linreg_wide"};
}

inline ExperimentConfig preset(std::string_view name, const std::filesystem::path& data_dir) {
    ExperimentConfig c;
    c.name = std::string(name);
    c.data_path = (data_dir / (std::string(name) + ".csv")).string();
    c.bias = false;
    if (name == "iris") {
        c.schema.task = Task::Multiclass;
        c.scaling = ScalingMode::None;
        c.intercept = InterceptPlacement::AfterScaling;
        c.threshold = 0.2;
        c.epochs = 200;
    } else if (name == "digits") {
        c.schema.task = Task::Multiclass;
        c.scaling = ScalingMode::MeanCenter255;
        c.threshold = 0.2;
        c.epochs = 200;
    } else if (name == "breast_cancer") {
        c.schema.task = Task::Binary;
        c.scaling = ScalingMode::SumToOne;
        c.intercept = InterceptPlacement::BeforeScaling;
        c.threshold = 0.69;
        c.epochs = 1000;
    } else if (name == "two_moons") {
        c.schema.task = Task::Binary;
        c.scaling = ScalingMode::Standardize;
        c.hidden = {16};
        c.bias = true;
        c.init_scale = 1.0;
        c.batch_size = 32;
        c.epochs = 200;
    } else if (name == "linreg_small" || name == "linreg_wide") {
        c.schema.task = Task::Regression;
        c.scaling = ScalingMode::SumToOne;
        c.intercept = InterceptPlacement::BeforeScaling;
        c.epochs = 1000;
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    return c;
}

}  // namespace lipschitz_lr
