// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/learn/phase_layer.hpp"

#include <cmath>
#include <numbers>

#include "rispa/errors.hpp"

namespace rispa::learn {

CMatrix phase_forward(const RMatrix& angles, bool lock_first_row)
{
    CMatrix V(angles.rows(), angles.cols());
    for (Eigen::Index n = 0; n < angles.cols(); ++n)
        for (Eigen::Index m = 0; m < angles.rows(); ++m)
            V(m, n) = cplx(std::cos(angles(m, n)), std::sin(angles(m, n)));
    if (lock_first_row && V.rows() > 0)
        V.row(0).setOnes();
    return V;
}

RMatrix phase_backward(const RMatrix& angles, const RMatrix& grad_re, const RMatrix& grad_im, bool lock_first_row)
{
    if (grad_re.rows() != angles.rows() || grad_re.cols() != angles.cols() || grad_im.rows() != angles.rows() ||
        grad_im.cols() != angles.cols())
        throw DimensionError("phase gradient shape does not match the angle matrix");
    RMatrix g = -angles.array().sin() * grad_re.array() + angles.array().cos() * grad_im.array();
    if (lock_first_row && g.rows() > 0)
        g.row(0).setZero();
    return g;
}

PhaseLayer::PhaseLayer(std::size_t elements, std::size_t allocations, bool lock_first_row)
    : angles_(RMatrix::Zero(static_cast<Eigen::Index>(elements + 1), static_cast<Eigen::Index>(allocations))),
      locked_(lock_first_row)
{
    if (allocations < 1)
        throw ParameterError("phase layer needs at least one allocation");
}

PhaseLayer PhaseLayer::random(std::size_t elements, std::size_t allocations, Rng& rng, bool lock_first_row)
{
    PhaseLayer layer(elements, allocations, lock_first_row);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index n = 0; n < layer.angles_.cols(); ++n)
        for (Eigen::Index m = 0; m < layer.angles_.rows(); ++m)
            layer.angles_(m, n) = (lock_first_row && m == 0) ? 0.0 : u(rng);
    return layer;
}

} // namespace rispa::learn
