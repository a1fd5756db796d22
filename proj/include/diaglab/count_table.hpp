#pragma once

#include "diaglab/bareiss.hpp"
#include "diaglab/error.hpp"
#include "diaglab/parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace diaglab {

using i128 = __int128;
using u128 = unsigned __int128;

inline constexpr i128 kI128Max = static_cast<i128>(~u128(0) >> 1);

inline i128 checked_mul(i128 a, i128 b) {
  i128 out;
  if (__builtin_mul_overflow(a, b, &out)) throw DomainError("value overflow; reduce X");
  return out;
}

inline i128 checked_add(i128 a, i128 b) {
  i128 out;
  if (__builtin_add_overflow(a, b, &out)) throw DomainError("value overflow; reduce X");
  return out;
}

inline i128 checked_pow(i128 x, int e) {
  i128 p = 1;
  for (int i = 0; i < e; ++i) p = checked_mul(p, x);
  return p;
}

inline std::uint64_t checked_count_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw DomainError("count overflow");
  return out;
}

inline std::uint64_t checked_count_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw DomainError("count overflow");
  return out;
}

inline BigInt to_big(i128 v) {
  const bool neg = v < 0;
  u128 m = neg ? u128(0) - static_cast<u128>(v) : static_cast<u128>(v);
  BigInt out = BigInt(static_cast<std::uint64_t>(m >> 64));
  out <<= 64;
  out += static_cast<std::uint64_t>(m);
  return neg ? BigInt(-out) : out;
}

inline BigInt to_big(u128 v) {
  BigInt out = BigInt(static_cast<std::uint64_t>(v >> 64));
  out <<= 64;
  out += static_cast<std::uint64_t>(v);
  return out;
}

inline std::string to_string(i128 v) { return to_big(v).str(); }

// ---------------------------------------------------------------------------
// Balanced mixed-radix packing of bounded integer vectors.  Coordinate i lies
// in [-B_i, B_i]; the packed value is sum_i v_i * M_i with M_0 = 1 and
// M_{i+1} = M_i (2 B_i + 1).  Packing is linear, so vector sums pack to sums of
// packed values as long as every partial sum respects the bounds.
class KeyCodec {
 public:
  KeyCodec() = default;

  explicit KeyCodec(std::vector<i128> bounds) : bounds_(std::move(bounds)) {
    i128 weight = 1;
    for (auto b : bounds_) {
      if (b < 0) throw DomainError("negative coordinate bound");
      weights_.push_back(weight);
      const i128 radix = checked_add(checked_mul(b, 2), 1);
      weight = checked_mul(weight, radix);
      if (weight > (kI128Max >> 2)) throw DomainError("value overflow; reduce X");
    }
    span_ = weight;
    half_span_ = (weight - 1) / 2;
  }

  std::size_t dims() const { return bounds_.size(); }
  const std::vector<i128>& bounds() const { return bounds_; }
  i128 max_abs_packed() const { return half_span_; }
  bool fits_int64() const { return half_span_ < (i128(1) << 61); }

  i128 encode(std::span<const i128> v) const {
    i128 p = 0;
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      if (v[i] > bounds_[i] || v[i] < -bounds_[i]) throw DomainError("value overflow; reduce X");
      p += v[i] * weights_[i];
    }
    return p;
  }

  std::vector<i128> decode(i128 packed) const {
    std::vector<i128> out(bounds_.size());
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      const i128 radix = 2 * bounds_[i] + 1;
      i128 d = packed % radix;
      if (d > bounds_[i]) d -= radix;
      if (d < -bounds_[i]) d += radix;
      out[i] = d;
      packed = (packed - d) / radix;
    }
    return out;
  }

 private:
  std::vector<i128> bounds_;
  std::vector<i128> weights_;
  i128 span_ = 1;
  i128 half_span_ = 0;
};

// ---------------------------------------------------------------------------

template <class Key>
struct CountEntry {
  Key key;
  std::uint64_t count;
};

// Sparse map from packed value keys to exact counts; entries sorted by key,
// unique, counts positive.
template <class Key>
class CountTable {
 public:
  using Entry = CountEntry<Key>;

  CountTable() = default;

  static CountTable unit() {
    CountTable t;
    t.entries_.push_back({Key(0), 1});
    return t;
  }

  // Sorts and merges duplicate keys.
  static CountTable from_unsorted(std::vector<Entry> raw) {
    std::sort(raw.begin(), raw.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    CountTable t;
    for (const auto& e : raw) {
      if (e.count == 0) continue;
      if (!t.entries_.empty() && t.entries_.back().key == e.key)
        t.entries_.back().count = checked_count_add(t.entries_.back().count, e.count);
      else
        t.entries_.push_back(e);
    }
    return t;
  }

  // Caller guarantees sorted, unique, positive.
  static CountTable from_sorted(std::vector<Entry> sorted) {
    CountTable t;
    t.entries_ = std::move(sorted);
    return t;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  Key min_key() const { return entries_.front().key; }
  Key max_key() const { return entries_.back().key; }

  std::uint64_t find(Key key) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                               [](const Entry& e, Key k) { return e.key < k; });
    return (it != entries_.end() && it->key == key) ? it->count : 0;
  }

  BigInt total() const {
    BigInt t = 0;
    for (const auto& e : entries_) t += e.count;
    return t;
  }

  // T(v) -> T(-v).
  CountTable negated() const {
    CountTable t;
    t.entries_.reserve(entries_.size());
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) t.entries_.push_back({Key(-it->key), it->count});
    return t;
  }

 private:
  std::vector<Entry> entries_;
};

// Accumulates sum of u64 * u64 products exactly.
class ProductAccumulator {
 public:
  void add(std::uint64_t a, std::uint64_t b) {
    const u128 p = static_cast<u128>(a) * b;
    if (acc_ > ~u128(0) - p) flush();
    acc_ += p;
  }
  BigInt value() const { return spill_ + to_big(acc_); }

 private:
  void flush() {
    spill_ += to_big(acc_);
    acc_ = 0;
  }
  u128 acc_ = 0;
  BigInt spill_ = 0;
};

// sum_v a(v) b(v)
template <class Key>
BigInt pair_sum(const CountTable<Key>& a, const CountTable<Key>& b) {
  ProductAccumulator acc;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  while (ia != a.entries().end() && ib != b.entries().end()) {
    if (ia->key < ib->key) {
      ++ia;
    } else if (ib->key < ia->key) {
      ++ib;
    } else {
      acc.add(ia->count, ib->count);
      ++ia;
      ++ib;
    }
  }
  return acc.value();
}

template <class Key>
BigInt square_sum(const CountTable<Key>& a) {
  ProductAccumulator acc;
  for (const auto& e : a.entries()) acc.add(e.count, e.count);
  return acc.value();
}

// ---------------------------------------------------------------------------
// Open-addressing accumulator used for sparse convolution chunks.
template <class Key>
class FlatCounter {
 public:
  explicit FlatCounter(std::size_t capacity_hint, std::size_t max_entries)
      : max_entries_(max_entries) {
    std::size_t cap = 16;
    while (cap < 2 * capacity_hint) cap <<= 1;
    slots_.assign(cap, Slot{});
    mask_ = cap - 1;
  }

  void add(Key key, std::uint64_t n) {
    std::size_t i = hash(key) & mask_;
    while (true) {
      Slot& s = slots_[i];
      if (s.count == 0) {
        s.key = key;
        s.count = n;
        if (++used_ * 10 > slots_.size() * 7) grow();
        return;
      }
      if (s.key == key) {
        s.count = checked_count_add(s.count, n);
        return;
      }
      i = (i + 1) & mask_;
    }
  }

  std::vector<CountEntry<Key>> drain_sorted() {
    std::vector<CountEntry<Key>> out;
    out.reserve(used_);
    for (const auto& s : slots_)
      if (s.count != 0) out.push_back({s.key, s.count});
    slots_.clear();
    slots_.shrink_to_fit();
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
  }

  std::size_t size() const { return used_; }

 private:
  struct Slot {
    Key key{};
    std::uint64_t count = 0;
  };

  static std::size_t hash(Key key) {
    const auto u = static_cast<u128>(static_cast<i128>(key));
    std::uint64_t z = static_cast<std::uint64_t>(u) ^ (static_cast<std::uint64_t>(u >> 64) * 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(z ^ (z >> 31));
  }

  void grow() {
    if (used_ > max_entries_) throw DomainError("memory cap exceeded");
    std::vector<Slot> old;
    old.swap(slots_);
    slots_.assign(old.size() * 2, Slot{});
    mask_ = slots_.size() - 1;
    used_ = 0;
    for (const auto& s : old)
      if (s.count != 0) {
        std::size_t i = hash(s.key) & mask_;
        while (slots_[i].count != 0) i = (i + 1) & mask_;
        slots_[i] = s;
        ++used_;
      }
  }

  std::vector<Slot> slots_;
  std::size_t mask_ = 0;
  std::size_t used_ = 0;
  std::size_t max_entries_;
};

struct ConvolveOptions {
  std::size_t max_entries = 200'000'000;
  unsigned workers = 1;
};

namespace detail {
inline constexpr i128 kDenseChunkSpan = i128(1) << 20;
inline constexpr i128 kDenseTotalCap = i128(1) << 27;
}  // namespace detail

// (a * b)(v) = sum_{x + y = v} a(x) b(y).  The output key range is cut into
// disjoint chunks; each chunk is filled independently (dense buffer when the
// key span is compact, hash otherwise) and the chunks are concatenated in key
// order, so the result is identical for every worker count.
template <class Key>
CountTable<Key> convolve(const CountTable<Key>& a, const CountTable<Key>& b, const ConvolveOptions& opts = {}) {
  if (a.empty() || b.empty()) return {};
  const CountTable<Key>& big = a.size() >= b.size() ? a : b;
  const CountTable<Key>& small = a.size() >= b.size() ? b : a;
  const i128 lo = static_cast<i128>(big.min_key()) + static_cast<i128>(small.min_key());
  const i128 hi = static_cast<i128>(big.max_key()) + static_cast<i128>(small.max_key()) + 1;
  const i128 span = hi - lo;
  const double pairs = static_cast<double>(big.size()) * static_cast<double>(small.size());
  const bool dense = span <= detail::kDenseTotalCap && static_cast<double>(span) <= 64.0 * pairs;

  std::size_t chunks;
  if (dense) {
    chunks = static_cast<std::size_t>((span + detail::kDenseChunkSpan - 1) / detail::kDenseChunkSpan);
  } else {
    const double est = std::min(pairs, static_cast<double>(span));
    chunks = std::max<std::size_t>(4 * std::max(1u, opts.workers), static_cast<std::size_t>(est / 4'000'000.0) + 1);
    if (static_cast<i128>(chunks) > span) chunks = static_cast<std::size_t>(span);
  }
  auto boundary = [&](std::size_t c) -> i128 { return lo + span * static_cast<i128>(c) / static_cast<i128>(chunks); };

  const auto& be = big.entries();
  auto slice = [&](i128 from, i128 to) {
    auto first = std::lower_bound(be.begin(), be.end(), from,
                                  [](const CountEntry<Key>& e, i128 k) { return static_cast<i128>(e.key) < k; });
    auto last = std::lower_bound(first, be.end(), to,
                                 [](const CountEntry<Key>& e, i128 k) { return static_cast<i128>(e.key) < k; });
    return std::pair{first, last};
  };

  std::vector<std::vector<CountEntry<Key>>> parts(chunks);
  parallel_for(chunks, opts.workers, [&](std::size_t c) {
    const i128 clo = boundary(c);
    const i128 chi = boundary(c + 1);
    if (dense) {
      std::vector<std::uint64_t> acc(static_cast<std::size_t>(chi - clo), 0);
      for (const auto& e : small.entries()) {
        const i128 k = e.key;
        auto [first, last] = slice(clo - k, chi - k);
        for (auto it = first; it != last; ++it) {
          auto& slot = acc[static_cast<std::size_t>(static_cast<i128>(it->key) + k - clo)];
          slot = checked_count_add(slot, checked_count_mul(it->count, e.count));
        }
      }
      auto& out = parts[c];
      for (std::size_t i = 0; i < acc.size(); ++i)
        if (acc[i] != 0) out.push_back({static_cast<Key>(clo + static_cast<i128>(i)), acc[i]});
    } else {
      std::size_t chunk_pairs = 0;
      for (const auto& e : small.entries()) {
        auto [first, last] = slice(clo - e.key, chi - e.key);
        chunk_pairs += static_cast<std::size_t>(last - first);
      }
      if (chunk_pairs == 0) return;
      const auto hint = static_cast<std::size_t>(std::min<i128>(
          std::min<i128>(chunk_pairs, chi - clo), static_cast<i128>(std::min<std::size_t>(opts.max_entries, 1u << 22))));
      FlatCounter<Key> acc(hint, opts.max_entries);
      for (const auto& e : small.entries()) {
        const i128 k = e.key;
        auto [first, last] = slice(clo - k, chi - k);
        for (auto it = first; it != last; ++it)
          acc.add(static_cast<Key>(static_cast<i128>(it->key) + k), checked_count_mul(it->count, e.count));
      }
      parts[c] = acc.drain_sorted();
    }
  });

  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  if (total > opts.max_entries) throw DomainError("memory cap exceeded");
  std::vector<CountEntry<Key>> merged;
  merged.reserve(total);
  for (auto& p : parts) {
    merged.insert(merged.end(), p.begin(), p.end());
    std::vector<CountEntry<Key>>().swap(p);
  }
  return CountTable<Key>::from_sorted(std::move(merged));
}

}  // namespace diaglab
