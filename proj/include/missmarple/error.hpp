#ifndef MISSMARPLE_ERROR_HPP
#define MISSMARPLE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mm {

// Error categories map onto CLI exit codes: usage=2, validation=3, runtime=4.
enum class ErrorKind { Usage = 2, Validation = 3, Runtime = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& msg) { return Error(ErrorKind::Usage, msg); }
inline Error validation_error(const std::string& msg) { return Error(ErrorKind::Validation, msg); }
inline Error runtime_error(const std::string& msg) { return Error(ErrorKind::Runtime, msg); }

} // namespace mm

#endif
