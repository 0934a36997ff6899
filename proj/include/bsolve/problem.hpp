#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bsolve/error.hpp"

namespace bsolve {

/// Per-pixel target and confidence for one solve. Both are row-major, one entry per pixel.
struct Problem {
    std::vector<double> target;
    std::vector<double> confidence;

    std::size_t size() const { return target.size(); }

    /// Uniform confidence of 1 over the given target.
    static Problem uniform(std::vector<double> target)
    {
        Problem p;
        p.confidence.assign(target.size(), 1.0);
        p.target = std::move(target);
        return p;
    }

    void validate(std::size_t npixels) const
    {
        detail::require_size(target.size(), npixels, "Problem target");
        detail::require_size(confidence.size(), npixels, "Problem confidence");
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (!std::isfinite(target[i])) {
                throw NumericalError("Problem: non-finite target at pixel " + std::to_string(i));
            }
            if (!std::isfinite(confidence[i]) || confidence[i] < 0.0) {
                throw ParameterError("Problem: confidence must be finite and non-negative (pixel " +
                                     std::to_string(i) + ")");
            }
        }
    }
};

}  // namespace bsolve
