/* Copyright 2026 The debias Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <concepts>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace debias {

/// One outcome of the binary source. Serializes as bit 1 = Head, 0 = Tail.
enum class Flip : std::uint8_t { Tail = 0, Head = 1 };

/// Head probability of a simulated coin, constrained to the open interval (0,1).
/// A degenerate coin (a = 0 or a = 1) never produces an accepted round, so
/// construction rejects it outright.
class BiasParams {
 public:
  explicit BiasParams(double head_prob) : a_(head_prob), b_(1.0 - head_prob) {
    if (!(head_prob > 0.0 && head_prob < 1.0)) {
      throw std::invalid_argument("BiasParams: head probability must lie strictly in (0,1)");
    }
  }

  double head_prob() const { return a_; }
  double tail_prob() const { return b_; }

 private:
  double a_;
  double b_;
};

/// Anything that yields flips one at a time. Samplers treat the stream as
/// i.i.d.; the bias itself stays unknown to them.
template <typename S>
concept BitSource = requires(S& s) {
  { s.next() } -> std::same_as<Flip>;
};

/// Thrown when a source runs dry. Raw sources report zero telemetry; samplers
/// re-throw with the cumulative flip count and the number of completed stages.
class SourceExhausted : public std::runtime_error {
 public:
  SourceExhausted() : std::runtime_error("bit source exhausted") {}
  SourceExhausted(std::uint64_t flips, std::uint64_t stages)
      : std::runtime_error("bit source exhausted after " + std::to_string(flips) + " flips"),
        flips_consumed(flips),
        stages_completed(stages) {}

  std::uint64_t flips_consumed = 0;
  std::uint64_t stages_completed = 0;
};

namespace detail {

// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Deterministic simulated coin. Flip i is a pure function of (seed, i): one
/// uniform double in [0,1) is derived from a counter-based generator and
/// compared against the head probability. Identical (params, seed) pairs
/// replay identical streams on any platform.
class BiasedCoin {
 public:
  BiasedCoin(BiasParams params, std::uint64_t seed)
      : head_prob_(params.head_prob()), seed_(seed) {}

  Flip next() {
    const std::uint64_t z = detail::mix64(seed_ + (++counter_) * detail::kGolden);
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;  // 53-bit uniform in [0,1)
    return u < head_prob_ ? Flip::Head : Flip::Tail;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  double head_prob_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

inline BiasedCoin simulated_source(BiasParams params, std::uint64_t seed) {
  return BiasedCoin(params, seed);
}

enum class BitOrder { MsbFirst };

/// Reads flips from a bit file: an 8-byte little-endian bit count, then
/// ceil(count/8) payload bytes, MSB-first within each byte, 1 = Head.
/// Pad bits beyond the count are ignored.
class BitFileReader {
 public:
  explicit BitFileReader(const std::string& path, BitOrder = BitOrder::MsbFirst)
      : in_(path, std::ios::binary) {
    if (!in_) {
      throw std::runtime_error("BitFileReader: cannot open " + path);
    }
    unsigned char header[8];
    if (!in_.read(reinterpret_cast<char*>(header), 8)) {
      throw std::runtime_error("BitFileReader: truncated header in " + path);
    }
    for (int i = 7; i >= 0; --i) {
      bit_count_ = (bit_count_ << 8) | header[i];
    }
  }

  Flip next() {
    if (bits_read_ == bit_count_) {
      throw SourceExhausted();
    }
    if (bit_pos_ == 8) {
      char byte;
      if (!in_.get(byte)) {
        throw SourceExhausted();  // payload shorter than the declared bit count
      }
      byte_ = static_cast<std::uint8_t>(byte);
      bit_pos_ = 0;
    }
    const unsigned bit = (byte_ >> (7 - bit_pos_)) & 1u;
    ++bit_pos_;
    ++bits_read_;
    return bit ? Flip::Head : Flip::Tail;
  }

  std::uint64_t bit_count() const { return bit_count_; }
  std::uint64_t bits_read() const { return bits_read_; }

 private:
  std::ifstream in_;
  std::uint64_t bit_count_ = 0;
  std::uint64_t bits_read_ = 0;
  std::uint8_t byte_ = 0;
  unsigned bit_pos_ = 8;
};

inline BitFileReader file_source(const std::string& path, BitOrder order = BitOrder::MsbFirst) {
  return BitFileReader(path, order);
}

/// Writes flips in the bit-file format understood by BitFileReader.
/// Pad bits in the final byte are written as Tails.
inline void write_bit_file(const std::string& path, std::span<const Flip> flips) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_bit_file: cannot open " + path);
  }
  const std::uint64_t count = flips.size();
  unsigned char header[8];
  for (int i = 0; i < 8; ++i) {
    header[i] = static_cast<unsigned char>((count >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(header), 8);
  std::uint8_t byte = 0;
  unsigned filled = 0;
  for (const Flip f : flips) {
    byte = static_cast<std::uint8_t>((byte << 1) | (f == Flip::Head ? 1 : 0));
    if (++filled == 8) {
      out.put(static_cast<char>(byte));
      byte = 0;
      filled = 0;
    }
  }
  if (filled > 0) {
    byte = static_cast<std::uint8_t>(byte << (8 - filled));
    out.put(static_cast<char>(byte));
  }
  if (!out) {
    throw std::runtime_error("write_bit_file: write failed for " + path);
  }
}

/// Counts successful next() calls on the wrapped source. Failed reads leave
/// the counter untouched.
template <BitSource S>
class CountingSource {
 public:
  explicit CountingSource(S& inner) : inner_(&inner) {}

  Flip next() {
    const Flip f = inner_->next();
    ++flips_consumed_;
    return f;
  }

  std::uint64_t flips_consumed() const { return flips_consumed_; }

 private:
  S* inner_;
  std::uint64_t flips_consumed_ = 0;
};

template <BitSource S>
CountingSource<S> with_counter(S& src) {
  return CountingSource<S>(src);
}

}  // namespace debias
