#include "sietrack/tensor.hpp"

#include <cmath>

namespace sietrack {

bool Tensor::all_finite() const {
    for (double x : v_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace sietrack
