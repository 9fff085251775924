#pragma once

#include <stdexcept>
#include <string>

namespace pfp {

// Stable error codes surfaced by the CLI as strings.
enum class errc {
    negative_location,
    non_positive_mass,
    mass_not_normalized,
    zero_mean,
    invalid_moments,
    infinite_support_count,
    negative_s,
    z_out_of_range,
    alpha_out_of_range,
    zero_s,
    spec_invalid,
    conditions_not_satisfied,
    monotonicity_violated,
    max_iter_exceeded,
    backend_unsupported,
    parse_error,
    unknown_equation_kind,
    missing_field,
    invalid_law,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::negative_location:       return "NegativeLocation";
        case errc::non_positive_mass:       return "NonPositiveMass";
        case errc::mass_not_normalized:     return "MassNotNormalized";
        case errc::zero_mean:               return "ZeroMean";
        case errc::invalid_moments:         return "InvalidMoments";
        case errc::infinite_support_count:  return "InfiniteSupportCount";
        case errc::negative_s:              return "NegativeS";
        case errc::z_out_of_range:          return "ZOutOfRange";
        case errc::alpha_out_of_range:      return "AlphaOutOfRange";
        case errc::zero_s:                  return "ZeroS";
        case errc::spec_invalid:            return "SpecInvalid";
        case errc::conditions_not_satisfied:return "ConditionsNotSatisfied";
        case errc::monotonicity_violated:   return "MonotonicityViolated";
        case errc::max_iter_exceeded:       return "MaxIterExceeded";
        case errc::backend_unsupported:     return "BackendUnsupported";
        case errc::parse_error:             return "ParseError";
        case errc::unknown_equation_kind:   return "UnknownEquationKind";
        case errc::missing_field:           return "MissingField";
        case errc::invalid_law:             return "InvalidLaw";
        case errc::io_error:                return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }
    const char* code_name() const noexcept { return errc_name(code_); }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
    throw Error(code, what);
}

} // namespace pfp
