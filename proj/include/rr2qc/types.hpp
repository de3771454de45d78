#ifndef RR2QC_TYPES_HPP
#define RR2QC_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rr2qc {

// Double throughout: desk-scale models are tiny and every loss in the
// pipeline is finite-difference checked at 1e-4 steps.
using Scalar = double;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

using LabelId = std::string;
using MetaLabelId = std::string;
using QuestionId = std::string;

using TokenId = int32_t;

}  // namespace rr2qc

#endif  // RR2QC_TYPES_HPP
