#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fg {

// Error kinds map 1:1 onto the C API status codes.
enum class Err {
  Argument,   // bad argument to an API entry point
  Contract,   // shape/width mismatch, non-scalar backward output, ...
  Domain,     // log/sqrt of non-positive input
  Numeric,    // non-finite value produced by a primitive
  Diverged,   // training produced non-finite loss/gradients
  Parse,      // config text malformed or out of range
  Format,     // binary file malformed (magic, truncation, shapes)
  Io,         // filesystem failure
  Config,     // valid config that cannot be satisfied (e.g. classifier budget)
  Unsupported // unknown subcommand / dataset name
};

class Error : public std::runtime_error {
public:
  Error(Err kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Err kind() const { return kind_; }

private:
  Err kind_;
};

inline std::string strf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  char buf[1024];
  vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return std::string(buf);
}

[[noreturn]] inline void raise(Err kind, const std::string& msg) { throw Error(kind, msg); }

} // namespace fg
