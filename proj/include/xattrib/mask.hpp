#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace xattrib {

// Running totals for the invariant audit. Every verify() call recounts the
// zeros of a mask and records the outcome here, so a full test run can
// assert checks > 0 and violations == 0.
struct MaskAudit {
  static std::atomic<std::uint64_t> checks;
  static std::atomic<std::uint64_t> violations;
};

// Binary mask over prompt positions. 1 keeps a token, 0 masks it. The zero
// count k is fixed at construction and preserved by every mutation.
class MaskState {
 public:
  // Zero-length placeholder, the state of a result before a search ran.
  MaskState() : k_(0) {}

  static MaskState all_ones(std::size_t length);
  // Zeros exactly the listed positions; duplicates and out-of-range
  // positions throw contract_error.
  static MaskState from_zero_positions(std::size_t length,
                                       const std::vector<std::size_t>& zeros);

  std::size_t length() const { return bits_.size(); }
  std::size_t zero_count() const { return k_; }
  std::size_t one_count() const { return bits_.size() - k_; }
  bool at(std::size_t i) const { return bits_[i] != 0; }

  // Masks position l (currently 1) and unmasks position v (currently 0).
  // Throws invalid_state if either side does not hold, which keeps the
  // zero count constant across every successful call.
  void swap(std::size_t l, std::size_t v);

  std::vector<std::size_t> zero_positions() const;
  // Mask as reals, the evaluation point for gradient calls: exactly 0.0
  // or 1.0 per entry.
  std::vector<double> to_reals() const;

  // Recounts zeros against k and updates MaskAudit; throws invalid_state
  // on mismatch.
  void verify() const;

  bool operator==(const MaskState& other) const = default;

 private:
  MaskState(std::vector<std::uint8_t> bits, std::size_t k)
      : bits_(std::move(bits)), k_(k) {}

  std::vector<std::uint8_t> bits_;
  std::size_t k_ = 0;
};

}  // namespace xattrib
