#include "ptower/rng.hpp"

namespace ptower {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53U;
constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

std::uint64_t hash_label(std::uint64_t state, std::string_view label) {
  // FNV-1a over the bytes, seeded by the running state, then length-tagged.
  std::uint64_t h = 0xCBF29CE484222325ULL ^ state;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix64(mix64(h) ^ mix64(state + label.size()));
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMul0, ctr[0], lo0, hi0);
    mulhilo(kMul1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

void Philox4x32::refill() noexcept {
  buffer_ = block(counter_, key_);
  for (auto& word : counter_) {
    if (++word != 0) break;
  }
  used_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() noexcept {
  if (used_ >= 4) refill();
  const std::uint64_t lo = buffer_[used_];
  const std::uint64_t hi = buffer_[used_ + 1];
  used_ += 2;
  return lo | (hi << 32);
}

std::uint64_t Philox4x32::key() const noexcept {
  return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
}

std::uint64_t seed_split(std::uint64_t master, std::initializer_list<std::string_view> path) {
  std::uint64_t state = mix64(master);
  for (auto label : path) state = hash_label(state, label);
  return state;
}

std::uint64_t seed_split(std::uint64_t master, const std::vector<std::string>& path) {
  std::uint64_t state = mix64(master);
  for (const auto& label : path) state = hash_label(state, label);
  return state;
}

std::uint64_t seed_split(std::uint64_t master, std::string_view label, std::uint64_t index) {
  const std::uint64_t state = hash_label(mix64(master), label);
  return mix64(state ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

}  // namespace ptower
