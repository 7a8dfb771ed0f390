#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paradram/model.hpp"

namespace paradram {

class ByteWriter;
class ByteReader;

/// One uniquely visited state and the running diagnostics as of its last
/// verbose index.
struct ChainRow {
  std::uint32_t processId = 1;  // contributing worker, 1-based
  std::uint32_t drStage = 0;    // stage at which the state was accepted
  double meanAcceptanceRate = 1.0;
  double adaptationMeasure = 0.0;
  std::uint64_t burninLocation = 0;  // verbose index
  std::uint64_t weight = 1;
  double logFunc = 0.0;
  Point state;

  friend bool operator==(const ChainRow&, const ChainRow&) = default;
};

struct VerboseEntry {
  double logFunc = 0.0;
  Point state;

  friend bool operator==(const VerboseEntry&, const VerboseEntry&) = default;
};

struct ChainStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // divided by total weight
  double acceptanceRate = 0.0;
};

std::vector<std::string> default_variable_names(int dimension);

/// Compact (weighted) Markov chain. Consecutive rows never share a state:
/// repeating the last state bumps its weight instead.
class CompactChain {
 public:
  explicit CompactChain(int dimension);
  CompactChain(int dimension, std::vector<std::string> variableNames);

  int dimension() const noexcept { return dimension_; }
  const std::vector<std::string>& variable_names() const noexcept { return variableNames_; }
  const std::vector<ChainRow>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t size() const noexcept { return rows_.size(); }
  std::uint64_t verbose_length() const noexcept { return verboseLength_; }

  /// Exact floating-point equality decides "same state".
  void append_or_increment(const ChainRow& row);

  std::vector<VerboseEntry> to_verbose() const;
  static CompactChain from_verbose(int dimension, const std::vector<VerboseEntry>& entries);

  /// Weighted moments over verbose indices >= fromVerboseIndex. The
  /// acceptance rate is (rows intersecting the range) / (verbose states in range).
  ChainStats stats(std::uint64_t fromVerboseIndex = 0) const;

  /// Sum of weights over number of rows.
  double compression_factor() const;

 private:
  int dimension_;
  std::vector<std::string> variableNames_;
  std::vector<ChainRow> rows_;
  std::uint64_t verboseLength_ = 0;
};

// Free-function spellings of the operations above.
inline void append_or_increment(CompactChain& chain, const ChainRow& row) { chain.append_or_increment(row); }
inline std::vector<VerboseEntry> to_verbose(const CompactChain& chain) { return chain.to_verbose(); }
inline ChainStats chain_stats(const CompactChain& chain, std::uint64_t fromVerboseIndex = 0) {
  return chain.stats(fromVerboseIndex);
}
inline double compression_factor(const CompactChain& chain) { return chain.compression_factor(); }

/// Streaming weighted mean and population covariance (West's weighted
/// Welford update). Used by the kernel so adaptation never re-reads the chain.
class RunningMoments {
 public:
  RunningMoments() = default;
  explicit RunningMoments(int dimension);

  void add(const Point& x, std::uint64_t weight = 1);

  std::uint64_t total_weight() const noexcept { return totalWeight_; }
  std::uint64_t count() const noexcept { return count_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  Eigen::MatrixXd covariance() const;

  void save(ByteWriter& out) const;
  static RunningMoments load(ByteReader& in);

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
  std::uint64_t totalWeight_ = 0;
  std::uint64_t count_ = 0;
};

}  // namespace paradram
