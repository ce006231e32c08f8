#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xattrib {

// An operation's stated precondition was broken by the caller.
class contract_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// k outside the range an operation accepts.
class invalid_cardinality : public contract_error {
 public:
  using contract_error::contract_error;
};

// An object is in a state the operation cannot act on, e.g. a mask with
// no swappable pair.
class invalid_state : public contract_error {
 public:
  using contract_error::contract_error;
};

// The adapter does not implement the requested capability.
class unsupported_capability : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration would exceed the configured evaluation budget.
class oracle_budget_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No adapter registered under the requested name, or it failed to load.
class adapter_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A result or artifact file could not be opened or written.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset file problems; line is 1-based, 0 when not tied to a line.
class dataset_error : public std::runtime_error {
 public:
  dataset_error(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class empty_dataset_error : public dataset_error {
 public:
  using dataset_error::dataset_error;
};

// Config file or flag value rejected; names the offending key.
class config_error : public std::runtime_error {
 public:
  config_error(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace xattrib
