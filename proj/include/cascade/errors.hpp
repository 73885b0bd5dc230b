#ifndef CASCADE_ERRORS_HPP
#define CASCADE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cascade {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a precondition (bad index, wrong dimension, probability out of range).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// A gradient or loss went NaN/Inf; the update was not applied.
class NumericFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ExpertUnavailable : public Error {
public:
    using Error::Error;
};

class ExpertProtocolError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ContractViolation(what);
}

} // namespace cascade

#endif // CASCADE_ERRORS_HPP
