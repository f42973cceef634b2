#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fump::checks {

struct CaseResult {
    std::string name;
    bool passed = false;
    double value = 0.0;      // measured deviation or count
    double tolerance = 0.0;  // pass bound on `value`
    std::string detail;
};

struct SuiteResult {
    std::string suite;
    std::vector<CaseResult> cases;
    double seconds = 0.0;

    bool passed() const;
    /// Largest `value` over all cases.
    double worst() const;
    /// One line per case, then a summary line.
    std::string report() const;
};

struct EquivarianceOptions {
    std::size_t scenes = 100;
    std::size_t transforms = 10;
    std::uint64_t seed = 1;
    double tolerance = 1e-9;
};

/// ECSA node embeddings of random scenes before and after random rigid
/// motions (rotation in (-pi, pi], translation in [-100, 100]^2). One case
/// per scene holding the largest absolute difference.
SuiteResult equivariance_suite(const EquivarianceOptions& options = {});

struct GradientOptions {
    std::size_t seeds = 10;
    int agents = 3;
    double step = 1e-6;
    double tolerance = 1e-5;
    std::size_t samples_per_param = 3;
};

/// Full training loss (encoder, both decoder stages, memory fusion, state
/// predictor) against central differences.
SuiteResult gradient_suite(const GradientOptions& options = {});

struct GeometryOptions {
    std::size_t chains = 1000;
    std::uint64_t seed = 3;
    double round_trip_tolerance = 1e-9;
    double anchor_tolerance = 1e-12;
    double world_frame_tolerance = 1e-9;
};

/// transform_chain against a direct world-to-target mapping, the t0 origin
/// and a change of world frame.
SuiteResult geometry_suite(const GeometryOptions& options = {});

struct MemoryOptions {
    std::size_t seeds = 1000;
    std::size_t max_ops = 200;
    std::size_t max_capacity = 5;
};

/// Random operation sequences against a straight-line model of the queue,
/// plus the threshold recurrence to one ulp.
SuiteResult memory_suite(const MemoryOptions& options = {});

struct MaskingOptions {
    std::size_t scenes = 100;
    std::size_t states = 10;
    std::uint64_t seed = 5;
};

/// Stage-II outputs with the mask drawn as zero, compared bitwise across
/// random ego states.
SuiteResult masking_suite(const MaskingOptions& options = {});

/// Names accepted by `run_suite`, in run order for "all".
const std::vector<std::string>& suite_names();

/// Runs one suite with default options; "all" is not accepted here.
SuiteResult run_suite(const std::string& name);

}  // namespace fump::checks
