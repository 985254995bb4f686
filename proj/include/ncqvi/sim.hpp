#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncqvi/market.hpp"
#include "ncqvi/problem.hpp"
#include "ncqvi/regions.hpp"

namespace ncqvi {

enum class StrategyKind { PiStar, NoTrade, RegionPolicy };

struct StrategySpec {
    StrategyKind kind = StrategyKind::PiStar;
    double w = 1.0;  // pi_star target wealth
    Position initial;
    long paths = 100000;
    std::uint64_t seed = 1;
    double dt = 1e-3;
    int jobs = 1;
    /// RegionPolicy: maps of one solution at several times to maturity; the map with the
    /// nearest tau is used at each step.
    std::vector<const RegionMap*> policy;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long paths_used = 0;
    double frac_hit_w = 0.0;
    double frac_hit_K = 0.0;
    double frac_expired = 0.0;
    std::vector<std::string> warnings;
};

/// Monte Carlo value E[U(Z_T)] of an explicit strategy.  GBM segments are simulated exactly
/// in log space with a Brownian-bridge barrier correction; the Gaussian mean return model uses
/// Euler steps (dt/10 near barriers).  Throws DomainError for an insolvent start.
McEstimate simulate_strategy(const StrategySpec& spec, const ProblemSpec& problem);

/// Per-path generator seed: splitmix64 of (seed, path).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

}  // namespace ncqvi
