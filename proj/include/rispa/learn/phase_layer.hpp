// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_LEARN_PHASE_LAYER_HPP
#define RISPA_LEARN_PHASE_LAYER_HPP

#include "rispa/model.hpp"

namespace rispa::learn {

// V = cos(Phi) + j sin(Phi). With the first row locked it is emitted as exactly 1.
CMatrix phase_forward(const RMatrix& angles, bool lock_first_row = true);

// dLoss/dPhi from dLoss/dRe(V) and dLoss/dIm(V); zero on a locked first row.
RMatrix phase_backward(const RMatrix& angles, const RMatrix& grad_re, const RMatrix& grad_im,
                       bool lock_first_row = true);

// Trainable (L+1) x N_v angle matrix. Unit modulus holds for any angle values.
class PhaseLayer {
public:
    PhaseLayer() = default;
    PhaseLayer(std::size_t elements, std::size_t allocations, bool lock_first_row = true);

    // Angles drawn uniformly from [0, 2 pi).
    static PhaseLayer random(std::size_t elements, std::size_t allocations, Rng& rng, bool lock_first_row = true);

    RMatrix& angles() noexcept { return angles_; }
    const RMatrix& angles() const noexcept { return angles_; }
    bool first_row_locked() const noexcept { return locked_; }
    std::size_t elements() const noexcept { return static_cast<std::size_t>(angles_.rows()) - 1; }
    std::size_t allocations() const noexcept { return static_cast<std::size_t>(angles_.cols()); }

    CMatrix forward() const { return phase_forward(angles_, locked_); }
    RMatrix backward(const RMatrix& grad_re, const RMatrix& grad_im) const
    {
        return phase_backward(angles_, grad_re, grad_im, locked_);
    }

private:
    RMatrix angles_;
    bool locked_ = true;
};

} // namespace rispa::learn

#endif
