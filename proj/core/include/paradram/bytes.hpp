#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "paradram/error.hpp"

namespace paradram {

static_assert(std::endian::native == std::endian::little,
              "binary codecs assume a little-endian host");

/// Append-only little-endian buffer used by the binary chain codec and the
/// restart snapshot. Doubles are stored as raw IEEE-754 bits.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.insert(buffer_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::string_view raw) { buffer_.append(raw); }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buffer_.insert(buffer_.end(), s.begin(), s.end());
  }

  void put_vector(const Eigen::VectorXd& v) {
    put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(v[i]);
  }

  void put_matrix(const Eigen::MatrixXd& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) put<double>(m(i, j));
  }

  template <typename T>
  void put_list(const std::vector<T>& values) {
    put<std::uint64_t>(values.size());
    for (const auto& v : values) put<T>(v);
  }

  const std::string& bytes() const noexcept { return buffer_; }
  std::string take() && { return std::move(buffer_); }

 private:
  std::string buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view get_bytes(std::size_t n) {
    need(n);
    const auto raw = data_.substr(pos_, n);
    pos_ += n;
    return raw;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  Eigen::VectorXd get_vector() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(double));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<double>();
    return v;
  }

  Eigen::MatrixXd get_matrix() {
    const auto rows = get<std::uint64_t>();
    const auto cols = get<std::uint64_t>();
    need(rows * cols * sizeof(double));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = get<double>();
    return m;
  }

  template <typename T>
  std::vector<T> get_list() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(T));
    std::vector<T> values;
    values.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) values.push_back(get<T>());
    return values;
  }

  bool at_end() const noexcept { return pos_ == data_.size(); }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw Error(ErrorCode::CorruptRestart, "truncated binary payload");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a. Used for the restart checksum and the spec digest, both of
/// which must be stable across builds (std::hash is not).
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace paradram
