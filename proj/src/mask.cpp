#include "xattrib/mask.hpp"

#include <algorithm>
#include <string>

#include "xattrib/errors.hpp"

namespace xattrib {

std::atomic<std::uint64_t> MaskAudit::checks{0};
std::atomic<std::uint64_t> MaskAudit::violations{0};

MaskState MaskState::all_ones(std::size_t length) {
  if (length == 0) {
    throw contract_error("mask length must be positive");
  }
  return MaskState(std::vector<std::uint8_t>(length, 1), 0);
}

MaskState MaskState::from_zero_positions(std::size_t length,
                                         const std::vector<std::size_t>& zeros) {
  MaskState m = all_ones(length);
  for (std::size_t z : zeros) {
    if (z >= length) {
      throw contract_error("zero position " + std::to_string(z) +
                           " outside mask of length " + std::to_string(length));
    }
    if (m.bits_[z] == 0) {
      throw contract_error("duplicate zero position " + std::to_string(z));
    }
    m.bits_[z] = 0;
    ++m.k_;
  }
  return m;
}

void MaskState::swap(std::size_t l, std::size_t v) {
  if (l >= bits_.size() || v >= bits_.size()) {
    throw contract_error("swap position outside mask");
  }
  if (bits_[l] != 1 || bits_[v] != 0) {
    throw invalid_state("swap requires an unmasked l and a masked v");
  }
  bits_[l] = 0;
  bits_[v] = 1;
}

std::vector<std::size_t> MaskState::zero_positions() const {
  std::vector<std::size_t> zeros;
  zeros.reserve(k_);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] == 0) zeros.push_back(i);
  }
  return zeros;
}

std::vector<double> MaskState::to_reals() const {
  std::vector<double> point(bits_.size());
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    point[i] = bits_[i] ? 1.0 : 0.0;
  }
  return point;
}

void MaskState::verify() const {
  std::size_t zeros = static_cast<std::size_t>(
      std::count(bits_.begin(), bits_.end(), std::uint8_t{0}));
  MaskAudit::checks.fetch_add(1, std::memory_order_relaxed);
  if (zeros != k_) {
    MaskAudit::violations.fetch_add(1, std::memory_order_relaxed);
    throw invalid_state("mask zero count " + std::to_string(zeros) +
                        " drifted from k = " + std::to_string(k_));
  }
}

}  // namespace xattrib
