#include "ncqvi/problem.hpp"

#include <cmath>

#include "ncqvi/error.hpp"

namespace ncqvi {

void ProblemSpec::validate() const {
    market.validate();
    costs.validate();
    if (!std::isfinite(T) || T <= 0.0) throw ValidationError("problem.T must be > 0");
}

}  // namespace ncqvi
