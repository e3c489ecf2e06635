#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aginglab {

// All failure paths throw Error with a stable machine-readable code
// ("insufficient-samples", "target-unreachable", ...). what() carries
// "code: detail" for humans; code() is the contract tests match on.
class Error : public std::runtime_error {
public:
  explicit Error(std::string code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

}  // namespace aginglab
