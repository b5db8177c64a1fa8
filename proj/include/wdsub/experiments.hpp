#pragma once

// Batches of random instances for the bilinear estimate, the main estimate and
// the telescope, as run by the command-line tool and the acceptance suite.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wdsub/bellman.hpp"
#include "wdsub/martingale.hpp"
#include "wdsub/weights.hpp"

namespace wdsub {

/// Implied constant checked by the main and bilinear estimates. The exact
/// constant is not known; observed ratios are reported next to it.
inline constexpr double kDefaultCTarget = 10.0;

struct SimulationSpec {
    int depth = 10;
    int dim = 2;
    std::size_t instances = 100;
    std::uint64_t seed = 1;
    /// Power weight t^δ for every instance; otherwise a random truncated weight.
    std::optional<double> delta;
    /// Fixed weight for every instance; takes precedence over delta.
    std::optional<WeightTree> weight;
    double C_target = kDefaultCTarget;
    int jobs = 0;

    void validate() const;
};

struct SimulationRow {
    std::size_t instance = 0;
    /// "multiplier" (random signs) or "rotation".
    std::string kind;
    double Q2 = 1.0;
    double bilinear_ratio = 0.0;
    double main_ratio = 0.0;
    double duality_gap = 0.0;
    bool pass = false;
};

struct SimulationReport {
    std::vector<SimulationRow> rows;
    double max_bilinear_ratio = 0.0;
    double max_main_ratio = 0.0;
    double max_duality_gap = 0.0;
    std::size_t worst_instance = 0;
    bool pass = true;
};

/// Instance i draws X, the pair partner Y (alternating multiplier and
/// rotation), a test martingale Z and, without delta or weight, a weight, all
/// from substream (seed, i). Output is independent of jobs.
SimulationReport run_simulation(const SimulationSpec& spec, const BellmanConfig& cfg);
std::string simulation_csv(const SimulationReport& report);
std::string to_structured_text(const SimulationReport& report, const SimulationSpec& spec);

struct TelescopeSpec {
    int depth = 8;
    int dim = 2;
    std::size_t instances = 100;
    std::uint64_t seed = 1;
    /// Anchor; 0 selects ℓ.
    double a = 0.0;
    std::optional<WeightTree> weight;
    int jobs = 0;

    void validate() const;
};

struct TelescopeRow {
    std::size_t instance = 0;
    /// "independent" (Z drawn separately) or "rotation" (Z rotation-subordinate to X).
    std::string kind;
    double Q2 = 1.0;
    double lhs = 0.0;
    double sum_increments = 0.0;
    double bellman_bound = 0.0;
    double min_margin = 0.0;
    double max_linear_residual = 0.0;
    bool pass = false;
};

struct TelescopeReport {
    std::vector<TelescopeRow> rows;
    double min_margin = 0.0;
    double max_linear_residual = 0.0;
    std::size_t worst_instance = 0;
    /// Anchor sensitivity on instance 0.
    std::vector<AnchorSensitivity> sensitivity;
    bool pass = true;
};

/// Weights without spec.weight are random and truncated at 1/ε with
/// characteristic at most Q.
TelescopeReport run_telescope_batch(const TelescopeSpec& spec, const BellmanConfig& cfg);
std::string telescope_csv(const TelescopeReport& report);
std::string to_structured_text(const TelescopeReport& report, const TelescopeSpec& spec);

}  // namespace wdsub
