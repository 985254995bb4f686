#pragma once

#include "ncqvi/market.hpp"
#include "ncqvi/utility.hpp"

namespace ncqvi {

/// Everything that defines one portfolio problem: market, costs, terminal utility,
/// liquidation floor K (= utility floor), horizon T and the short-sale flag.
struct ProblemSpec {
    MarketModel market;
    CostSpec costs;
    Utility utility;
    double T = 1.0;
    bool short_sale_allowed = true;

    double K() const { return utility.floor(); }

    /// Checks every component; throws ValidationError.
    void validate() const;
};

}  // namespace ncqvi
