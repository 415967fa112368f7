#pragma once

#include <stdexcept>
#include <string>

namespace qestlab {

/// Base class for all numerical/domain failures raised by the library.
/// The CLI maps these to exit code 3; everything else (bad flags, bad
/// config files) is a configuration error and exits with code 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};
struct InvalidOperator : Error {
    explicit InvalidOperator(const std::string& what) : Error(what) {}
};
struct ZeroProbabilityBranch : Error {
    explicit ZeroProbabilityBranch(const std::string& what) : Error(what) {}
};
struct OutOfRegion : Error {
    explicit OutOfRegion(const std::string& what) : Error(what) {}
};
struct InvalidGrid : Error {
    explicit InvalidGrid(const std::string& what) : Error(what) {}
};
struct M2Violated : Error {
    explicit M2Violated(const std::string& what) : Error(what) {}
};
struct SingularSupport : Error {
    explicit SingularSupport(const std::string& what) : Error(what) {}
};
struct SingularFisher : Error {
    explicit SingularFisher(const std::string& what) : Error(what) {}
};
struct SingularB : Error {
    explicit SingularB(const std::string& what) : Error(what) {}
};
struct Infeasible : Error {
    explicit Infeasible(const std::string& what) : Error(what) {}
};
struct IdentifiabilityFailure : Error {
    explicit IdentifiabilityFailure(const std::string& what) : Error(what) {}
};
struct MultiparameterUnsupported : Error {
    explicit MultiparameterUnsupported(const std::string& what) : Error(what) {}
};
struct TreeTooLarge : Error {
    explicit TreeTooLarge(const std::string& what) : Error(what) {}
};
struct NotLocallyUnbiased : Error {
    explicit NotLocallyUnbiased(const std::string& what) : Error(what) {}
};
struct StateNotPositive : Error {
    explicit StateNotPositive(const std::string& what) : Error(what) {}
};
struct UnidentifiableDirection : Error {
    explicit UnidentifiableDirection(const std::string& what) : Error(what) {}
};
struct NotInterior : Error {
    explicit NotInterior(const std::string& what) : Error(what) {}
};
struct BoundaryWeight : Error {
    explicit BoundaryWeight(const std::string& what) : Error(what) {}
};
struct StrategyUnsupported : Error {
    explicit StrategyUnsupported(const std::string& what) : Error(what) {}
};
struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& what) : Error(what) {}
};

} // namespace qestlab
