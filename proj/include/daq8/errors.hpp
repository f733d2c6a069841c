#pragma once

#include <stdexcept>
#include <string>

namespace daq8 {

// Error taxonomy mapped to CLI exit codes:
//   contract violations (shape, domain, non-finite data, overflow risk) -> 4
//   IO / format / checkpoint problems                                   -> 3
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error("dimension error: " + msg) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& msg) : Error("contract violation: " + msg) {}
};

class OverflowRiskError : public Error {
public:
    explicit OverflowRiskError(const std::string& msg) : Error("overflow risk: " + msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& msg) : Error("checkpoint error: " + msg) {}
};

inline int exit_code_for(const Error& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const CheckpointError*>(&e))
        return 3;
    return 4;
}

} // namespace daq8
