#pragma once

#include <Eigen/Dense>

//! Shared dense-algebra aliases. Everything numeric in this library runs on
//! double-precision Eigen types; views are passed as Eigen::Ref to keep call
//! sites expression-friendly.
namespace rcnls {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

using ConstVectorRef = Eigen::Ref<const Vector>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

} // namespace rcnls
