#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace scn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Flat parameter vector in canonical layout (see policy.hpp).
using ParamVector = Eigen::VectorXd;

/// Invalid architecture, dimensions or experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. stepping an environment that is already done.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A file or prerequisite result that should exist does not.
class MissingArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A loss or gradient became NaN or infinite during training.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scn
