#include "supercorr/trajectory.hpp"

#include <stdexcept>

namespace supercorr {

void Trajectory::require_ok() const {
    if (meta.status != RunStatus::ok) {
        throw std::runtime_error("integration failure in '" + meta.method +
                                 "' run: " + meta.status_detail);
    }
}

}  // namespace supercorr
