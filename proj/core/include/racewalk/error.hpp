#pragma once

#include <stdexcept>
#include <string>

namespace racewalk {

// All recoverable failures in the library surface as racewalk::Error. The
// message starts with a short stable tag ("keypoint count", "no full cycle",
// ...) that callers and tests may match on.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace racewalk
