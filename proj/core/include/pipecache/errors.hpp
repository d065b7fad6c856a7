#ifndef PIPECACHE_ERRORS_HPP
#define PIPECACHE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pipecache {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, missing cost entries, invalid parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A graph or plan violates a structural requirement (cycle, no sink, ...).
class StructureError : public Error {
public:
    using Error::Error;
};

// A user-supplied callback (policy, prune, oracle schedule) broke its contract.
class ContractViolation : public Error {
public:
    using Error::Error;
};

}

#endif
