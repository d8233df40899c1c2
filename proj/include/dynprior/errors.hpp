#pragma once

#include <stdexcept>
#include <string>

namespace dynprior {

// Every error raised by the library derives from dynprior::error so callers can
// catch the family in one place and still discriminate by kind.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_parameter : public error {
public:
    using error::error;
};

class empty_input : public error {
public:
    using error::error;
};

class insufficient_data : public error {
public:
    using error::error;
};

class domain_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

}  // namespace dynprior
