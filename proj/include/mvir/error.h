#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mvir {

// All recoverable failures surface as mvir::Error; the CLI turns them into
// a single-line "error: ..." message and a nonzero exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void strcat_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void strcat_all(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    strcat_all(os, rest...);
}
} // namespace detail

template <typename... Args>
std::string strf(const Args&... args) {
    std::ostringstream os;
    detail::strcat_all(os, args...);
    return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    throw Error(strf(args...));
}

template <typename... Args>
void check(bool cond, const Args&... args) {
    if (!cond)
        fail(args...);
}

} // namespace mvir
