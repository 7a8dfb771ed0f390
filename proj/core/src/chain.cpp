#include "paradram/chain.hpp"

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"

namespace paradram {

std::vector<std::string> default_variable_names(int dimension) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(dimension));
  for (int i = 1; i <= dimension; ++i) names.push_back("Var" + std::to_string(i));
  return names;
}

CompactChain::CompactChain(int dimension) : CompactChain(dimension, default_variable_names(dimension)) {}

CompactChain::CompactChain(int dimension, std::vector<std::string> variableNames)
    : dimension_(dimension), variableNames_(std::move(variableNames)) {
  if (dimension_ < 1) throw Error(ErrorCode::BadDimension, "chain dimension must be positive");
  if (static_cast<int>(variableNames_.size()) != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "one variable name per dimension required");
}

void CompactChain::append_or_increment(const ChainRow& row) {
  if (row.state.size() != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "row state length differs from chain dimension");
  if (row.weight == 0) throw Error(ErrorCode::InvalidSpec, "row weight must be at least 1");
  verboseLength_ += row.weight;
  if (!rows_.empty() && rows_.back().state == row.state) {
    auto& last = rows_.back();
    last.weight += row.weight;
    last.meanAcceptanceRate = row.meanAcceptanceRate;
    last.burninLocation = row.burninLocation;
    return;
  }
  rows_.push_back(row);
}

std::vector<VerboseEntry> CompactChain::to_verbose() const {
  std::vector<VerboseEntry> out;
  out.reserve(verboseLength_);
  for (const auto& row : rows_)
    for (std::uint64_t k = 0; k < row.weight; ++k) out.push_back({row.logFunc, row.state});
  return out;
}

CompactChain CompactChain::from_verbose(int dimension, const std::vector<VerboseEntry>& entries) {
  CompactChain chain(dimension);
  for (const auto& e : entries) {
    ChainRow row;
    row.logFunc = e.logFunc;
    row.state = e.state;
    chain.append_or_increment(row);
  }
  return chain;
}

ChainStats CompactChain::stats(std::uint64_t fromVerboseIndex) const {
  if (fromVerboseIndex >= verboseLength_)
    throw Error(ErrorCode::EmptyRange, "no verbose states at or after index " + std::to_string(fromVerboseIndex));

  // Two passes over the rows: mean first, then centred scatter.
  ChainStats out;
  out.mean = Eigen::VectorXd::Zero(dimension_);
  out.covariance = Eigen::MatrixXd::Zero(dimension_, dimension_);
  std::uint64_t total = 0;
  std::uint64_t rowsInRange = 0;
  std::uint64_t start = 0;
  std::vector<std::pair<const ChainRow*, std::uint64_t>> active;
  for (const auto& row : rows_) {
    const std::uint64_t end = start + row.weight;
    if (end > fromVerboseIndex) {
      const std::uint64_t w = end - std::max(start, fromVerboseIndex);
      active.emplace_back(&row, w);
      total += w;
      ++rowsInRange;
    }
    start = end;
  }
  for (const auto& [row, w] : active) out.mean += static_cast<double>(w) * row->state;
  out.mean /= static_cast<double>(total);
  for (const auto& [row, w] : active) {
    const Eigen::VectorXd delta = row->state - out.mean;
    out.covariance.noalias() += static_cast<double>(w) * delta * delta.transpose();
  }
  out.covariance /= static_cast<double>(total);
  out.acceptanceRate = static_cast<double>(rowsInRange) / static_cast<double>(total);
  return out;
}

double CompactChain::compression_factor() const {
  if (rows_.empty()) throw Error(ErrorCode::EmptyRange, "compression factor of an empty chain");
  return static_cast<double>(verboseLength_) / static_cast<double>(rows_.size());
}

RunningMoments::RunningMoments(int dimension)
    : mean_(Eigen::VectorXd::Zero(dimension)), scatter_(Eigen::MatrixXd::Zero(dimension, dimension)) {}

void RunningMoments::add(const Point& x, std::uint64_t weight) {
  if (weight == 0) return;
  totalWeight_ += weight;
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += (static_cast<double>(weight) / static_cast<double>(totalWeight_)) * delta;
  scatter_.noalias() += static_cast<double>(weight) * delta * (x - mean_).transpose();
}

Eigen::MatrixXd RunningMoments::covariance() const {
  if (totalWeight_ == 0) return scatter_;
  Eigen::MatrixXd cov = scatter_ / static_cast<double>(totalWeight_);
  return 0.5 * (cov + cov.transpose());
}

void RunningMoments::save(ByteWriter& out) const {
  out.put_vector(mean_);
  out.put_matrix(scatter_);
  out.put<std::uint64_t>(totalWeight_);
  out.put<std::uint64_t>(count_);
}

RunningMoments RunningMoments::load(ByteReader& in) {
  RunningMoments m;
  m.mean_ = in.get_vector();
  m.scatter_ = in.get_matrix();
  m.totalWeight_ = in.get<std::uint64_t>();
  m.count_ = in.get<std::uint64_t>();
  return m;
}

}  // namespace paradram
