#include "paradram/persist.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <limits>
#include <sstream>
#include <system_error>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"

namespace paradram {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSnapshotMagic = "PDRMSNAP";
constexpr std::size_t kFixedColumns = 7;
constexpr std::array<std::string_view, kFixedColumns> kFixedHeader = {
    "ProcessID",   "DelayedRejectionStage", "MeanAcceptanceRate", "AdaptationMeasure",
    "BurninLocation", "SampleWeight",       "SampleLogFunc"};

fs::path with_suffix(const fs::path& prefix, std::string_view suffix) {
  fs::path p = prefix;
  p += std::string(suffix);
  return p;
}

[[noreturn]] void io_failure(const fs::path& path, std::string_view what) {
  throw Error(ErrorCode::IoFailure, std::string(what) + ": " + path.string());
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delimiter, start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return fields;
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view text, const fs::path& path) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw Error(ErrorCode::CorruptChain, "bad number '" + std::string(text) + "' in " + path.string());
  return value;
}

// from_chars does not accept the "inf" spellings to_chars produces for log 0.
double parse_real(std::string_view text, const fs::path& path) {
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  return parse_number<double>(text, path);
}

ChainFile read_ascii_chain(const std::string& data, const fs::path& path, bool allowPartialTail) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    const auto eol = data.find('\n', pos);
    if (eol == std::string::npos) return false;
    line = std::string_view(data).substr(pos, eol - pos);
    pos = eol + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != kAsciiVersionLine)
    throw Error(ErrorCode::CorruptChain, "missing format line in " + path.string());
  if (!next_line(line) || !line.starts_with(kFixedHeader[0]) || line.size() <= kFixedHeader[0].size())
    throw Error(ErrorCode::CorruptChain, "missing header in " + path.string());
  const char delimiter = line[kFixedHeader[0].size()];
  const auto header = split(line, delimiter);
  if (header.size() <= kFixedColumns)
    throw Error(ErrorCode::CorruptChain, "header has no state columns in " + path.string());
  for (std::size_t i = 0; i < kFixedColumns; ++i)
    if (header[i] != kFixedHeader[i])
      throw Error(ErrorCode::CorruptChain, "unexpected column '" + std::string(header[i]) + "' in " + path.string());
  std::vector<std::string> names(header.begin() + kFixedColumns, header.end());
  const int d = static_cast<int>(names.size());

  ChainFile file{CompactChain(d, std::move(names)), ChainFormat::Ascii, delimiter, {}};
  while (pos < data.size()) {
    const std::size_t lineStart = pos;
    if (!next_line(line)) {
      if (allowPartialTail) break;
      throw Error(ErrorCode::CorruptChain, "unterminated last row in " + path.string());
    }
    const auto fields = split(line, delimiter);
    if (fields.size() != kFixedColumns + static_cast<std::size_t>(d)) {
      if (allowPartialTail) {
        pos = lineStart;
        break;
      }
      throw Error(ErrorCode::CorruptChain, "row has wrong column count in " + path.string());
    }
    ChainRow row;
    row.processId = parse_number<std::uint32_t>(fields[0], path);
    row.drStage = parse_number<std::uint32_t>(fields[1], path);
    row.meanAcceptanceRate = parse_real(fields[2], path);
    row.adaptationMeasure = parse_real(fields[3], path);
    row.burninLocation = parse_number<std::uint64_t>(fields[4], path);
    row.weight = parse_number<std::uint64_t>(fields[5], path);
    row.logFunc = parse_real(fields[6], path);
    row.state.resize(d);
    for (int i = 0; i < d; ++i) row.state[i] = parse_real(fields[kFixedColumns + i], path);
    file.chain.append_or_increment(row);
    file.rowEndOffsets.push_back(pos);
  }
  return file;
}

ChainFile read_binary_chain(const std::string& data, const fs::path& path, bool allowPartialTail) {
  ByteReader in(data);
  in.get_bytes(kChainMagic.size());
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw Error(ErrorCode::CorruptChain, "unsupported chain format version in " + path.string());
  const auto columns = in.get<std::uint32_t>();
  if (columns <= kFixedColumns) throw Error(ErrorCode::CorruptChain, "no state columns in " + path.string());
  const int d = static_cast<int>(columns - kFixedColumns);

  ChainFile file{CompactChain(d), ChainFormat::Binary, ',', {}};
  const std::size_t record = binary_record_size(d);
  while (!in.at_end()) {
    if (data.size() - in.position() < record) {
      if (allowPartialTail) break;
      throw Error(ErrorCode::CorruptChain, "truncated record in " + path.string());
    }
    ChainRow row;
    row.processId = in.get<std::uint32_t>();
    row.drStage = in.get<std::uint32_t>();
    row.meanAcceptanceRate = in.get<double>();
    row.adaptationMeasure = in.get<double>();
    row.burninLocation = in.get<std::uint64_t>();
    row.weight = in.get<std::uint64_t>();
    row.logFunc = in.get<double>();
    row.state.resize(d);
    for (int i = 0; i < d; ++i) row.state[i] = in.get<double>();
    if (row.processId == 0 || row.weight == 0)
      throw Error(ErrorCode::CorruptChain, "invalid record in " + path.string());
    file.chain.append_or_increment(row);
    file.rowEndOffsets.push_back(in.position());
  }
  return file;
}

void truncate_file(const fs::path& path, std::uint64_t size) {
  std::error_code ec;
  const auto current = fs::file_size(path, ec);
  if (ec) io_failure(path, "cannot stat");
  if (current < size) throw Error(ErrorCode::CorruptRestart, "file shorter than its snapshot: " + path.string());
  fs::resize_file(path, size, ec);
  if (ec) io_failure(path, "cannot truncate");
}

}  // namespace

std::string_view to_string(ChainFormat format) noexcept {
  return format == ChainFormat::Binary ? "binary" : "ascii";
}

ChainFormat parse_chain_format(std::string_view text) {
  if (text == "ascii") return ChainFormat::Ascii;
  if (text == "binary") return ChainFormat::Binary;
  throw Error(ErrorCode::InvalidSpec, "format must be ascii or binary, got '" + std::string(text) + "'");
}

fs::path OutputSuite::chain_path() const {
  return with_suffix(prefix, format == ChainFormat::Binary ? "_chain.bin" : "_chain.txt");
}
fs::path OutputSuite::sample_path() const { return with_suffix(prefix, "_sample.txt"); }
fs::path OutputSuite::report_path() const { return with_suffix(prefix, "_report.txt"); }
fs::path OutputSuite::progress_path() const { return with_suffix(prefix, "_progress.txt"); }
fs::path OutputSuite::restart_path() const { return with_suffix(prefix, "_restart.bin"); }

OutputSuite OutputSuite::member(std::size_t index) const {
  OutputSuite sub = *this;
  sub.prefix = with_suffix(prefix, "_process_" + std::to_string(index + 1));
  return sub;
}

void OutputSuite::validate() const {
  if (prefix.empty() || prefix.filename().empty())
    throw Error(ErrorCode::InvalidSpec, "output prefix must be a non-empty file stem");
  const std::string_view forbidden = "0123456789.+-eE\n\r";
  if (forbidden.find(delimiter) != std::string_view::npos)
    throw Error(ErrorCode::InvalidSpec, "delimiter cannot be a character that appears in numbers");
}

std::string format_real(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::string chain_header(const std::vector<std::string>& variableNames, char delimiter) {
  std::string out;
  for (auto name : kFixedHeader) {
    out += name;
    out += delimiter;
  }
  for (std::size_t i = 0; i < variableNames.size(); ++i) {
    if (i) out += delimiter;
    out += variableNames[i];
  }
  return out;
}

std::string format_chain_row(const ChainRow& row, char delimiter) {
  std::string out;
  out.reserve(32 * (kFixedColumns + static_cast<std::size_t>(row.state.size())));
  auto field = [&](const std::string& text) {
    out += text;
    out += delimiter;
  };
  field(std::to_string(row.processId));
  field(std::to_string(row.drStage));
  field(format_real(row.meanAcceptanceRate));
  field(format_real(row.adaptationMeasure));
  field(std::to_string(row.burninLocation));
  field(std::to_string(row.weight));
  field(format_real(row.logFunc));
  for (Eigen::Index i = 0; i < row.state.size(); ++i) field(format_real(row.state[i]));
  out.pop_back();
  return out;
}

ChainWriter::ChainWriter(const fs::path& path, ChainFormat format, char delimiter,
                         const std::vector<std::string>& variableNames)
    : out_(path, std::ios::binary | std::ios::trunc), format_(format), delimiter_(delimiter) {
  if (!out_) io_failure(path, "cannot create chain file");
  if (format_ == ChainFormat::Ascii) {
    put(kAsciiVersionLine);
    put("\n");
    put(chain_header(variableNames, delimiter_));
    put("\n");
  } else {
    ByteWriter w;
    w.put_bytes(kChainMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kFixedColumns + variableNames.size()));
    put(w.bytes());
  }
}

ChainWriter::ChainWriter(const fs::path& path, ChainFormat format, char delimiter, std::uint64_t truncateTo)
    : format_(format), delimiter_(delimiter), bytes_(truncateTo) {
  truncate_file(path, truncateTo);
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) io_failure(path, "cannot reopen chain file");
}

void ChainWriter::put(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw Error(ErrorCode::IoFailure, "chain write failed");
  bytes_ += bytes.size();
}

void ChainWriter::write(const ChainRow& row) {
  if (format_ == ChainFormat::Ascii) {
    put(format_chain_row(row, delimiter_) + "\n");
    return;
  }
  ByteWriter w;
  w.put<std::uint32_t>(row.processId);
  w.put<std::uint32_t>(row.drStage);
  w.put<double>(row.meanAcceptanceRate);
  w.put<double>(row.adaptationMeasure);
  w.put<std::uint64_t>(row.burninLocation);
  w.put<std::uint64_t>(row.weight);
  w.put<double>(row.logFunc);
  for (Eigen::Index i = 0; i < row.state.size(); ++i) w.put<double>(row.state[i]);
  put(w.bytes());
}

void ChainWriter::flush() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoFailure, "chain flush failed");
}

namespace {

// A refined sample file: one unit-weight state per line.
ChainFile read_sample_chain(const std::string& data, const fs::path& path) {
  std::istringstream in(data);
  std::string line;
  std::getline(in, line);
  constexpr std::string_view lead = "SampleLogFunc";
  if (line.size() <= lead.size()) throw Error(ErrorCode::CorruptChain, "sample header has no state columns in " + path.string());
  const char delimiter = line[lead.size()];
  const auto header = split(line, delimiter);
  std::vector<std::string> names(header.begin() + 1, header.end());
  const int d = static_cast<int>(names.size());
  ChainFile file{CompactChain(d, std::move(names)), ChainFormat::Ascii, delimiter, {}};
  while (std::getline(in, line)) {
    const auto fields = split(line, delimiter);
    if (fields.size() != static_cast<std::size_t>(d) + 1)
      throw Error(ErrorCode::CorruptChain, "sample row has wrong column count in " + path.string());
    ChainRow row;
    row.logFunc = parse_real(fields[0], path);
    row.state.resize(d);
    for (int i = 0; i < d; ++i) row.state[i] = parse_real(fields[1 + static_cast<std::size_t>(i)], path);
    file.chain.append_or_increment(row);
  }
  return file;
}

}  // namespace

ChainFile read_chain_file(const fs::path& path, bool allowPartialTail) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoFailure, "no such chain file: " + path.string());
  const std::string data = read_text_file(path);
  if (data.starts_with(kChainMagic)) return read_binary_chain(data, path, allowPartialTail);
  if (data.starts_with(kAsciiVersionLine)) return read_ascii_chain(data, path, allowPartialTail);
  if (data.starts_with("SampleLogFunc")) return read_sample_chain(data, path);
  throw Error(ErrorCode::CorruptChain, "not a chain file: " + path.string());
}

void write_chain(const fs::path& path, const CompactChain& chain, ChainFormat format, char delimiter) {
  ChainWriter writer(path, format, delimiter, chain.variable_names());
  for (const auto& row : chain.rows()) writer.write(row);
  writer.flush();
}

std::string progress_header(char delimiter) {
  std::string out = "verboseLength";
  for (std::string_view col : {"compactLength", "meanAcceptanceRate", "lastAdaptationMeasure", "elapsedSeconds"}) {
    out += delimiter;
    out += col;
  }
  return out;
}

std::string format_progress(const ProgressTick& tick, std::optional<double> elapsedSeconds, char delimiter) {
  std::string out = std::to_string(tick.verboseLength);
  out += delimiter;
  out += std::to_string(tick.compactLength);
  out += delimiter;
  out += format_real(tick.meanAcceptanceRate);
  out += delimiter;
  out += format_real(tick.lastAdaptationMeasure);
  out += delimiter;
  if (elapsedSeconds) out += format_real(*elapsedSeconds);
  return out;
}

void write_sample(const fs::path& path, const RefinedSample& sample, const std::vector<std::string>& variableNames,
                  char delimiter) {
  std::string text = "SampleLogFunc";
  for (const auto& name : variableNames) {
    text += delimiter;
    text += name;
  }
  text += '\n';
  for (std::size_t k = 0; k < sample.points.size(); ++k) {
    text += format_real(sample.logFuncs[k]);
    for (Eigen::Index i = 0; i < sample.points[k].size(); ++i) {
      text += delimiter;
      text += format_real(sample.points[k][i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::string encode_snapshot(const RestartSnapshot& snapshot) {
  ByteWriter payload;
  payload.put<std::uint64_t>(snapshot.specDigest);
  payload.put<char>(snapshot.delimiter);
  payload.put<std::uint64_t>(snapshot.chainBytes);
  payload.put<std::uint64_t>(snapshot.rowsWritten);
  payload.put<std::uint64_t>(snapshot.progressBytes);
  payload.put_string(snapshot.samplerState);

  ByteWriter out;
  out.put_bytes(kSnapshotMagic);
  out.put<std::uint32_t>(snapshot.formatVersion);
  out.put_string(payload.bytes());
  out.put<std::uint64_t>(fnv1a64(payload.bytes()));
  return std::move(out).take();
}

RestartSnapshot decode_snapshot(std::string_view bytes) {
  if (!bytes.starts_with(kSnapshotMagic)) throw Error(ErrorCode::CorruptRestart, "restart file has bad magic");
  ByteReader in(bytes);
  in.get_bytes(kSnapshotMagic.size());
  RestartSnapshot s;
  s.formatVersion = in.get<std::uint32_t>();
  if (s.formatVersion != kFormatVersion) throw Error(ErrorCode::CorruptRestart, "unsupported restart file version");
  const std::string payload = in.get_string();
  const auto checksum = in.get<std::uint64_t>();
  if (!in.at_end() || checksum != fnv1a64(payload))
    throw Error(ErrorCode::CorruptRestart, "restart file checksum mismatch");
  ByteReader p(payload);
  s.specDigest = p.get<std::uint64_t>();
  s.delimiter = p.get<char>();
  s.chainBytes = p.get<std::uint64_t>();
  s.rowsWritten = p.get<std::uint64_t>();
  s.progressBytes = p.get<std::uint64_t>();
  s.samplerState = p.get_string();
  if (!p.at_end()) throw Error(ErrorCode::CorruptRestart, "restart payload has trailing bytes");
  return s;
}

void write_snapshot(const fs::path& path, const RestartSnapshot& snapshot) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, encode_snapshot(snapshot));
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) io_failure(path, "cannot replace restart file");
}

RestartSnapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_text_file(path)); }

std::string_view to_string(RunState state) noexcept {
  switch (state) {
    case RunState::Fresh: return "fresh";
    case RunState::Restartable: return "restartable";
    case RunState::Complete: return "complete";
  }
  return "unknown";
}

RunState detect_incomplete(const OutputSuite& suite) {
  const fs::path paths[] = {suite.chain_path(),    suite.sample_path(),  suite.report_path(),
                            suite.progress_path(), suite.restart_path()};
  bool any = false;
  for (const auto& p : paths) any = any || fs::exists(p);
  if (!any) return RunState::Fresh;

  if (fs::exists(suite.report_path())) {
    const std::string report = read_text_file(suite.report_path());
    std::string terminated(kReportTerminator);
    terminated += '\n';
    if (report.ends_with(terminated)) return RunState::Complete;
  }
  if (fs::exists(suite.chain_path()) && fs::exists(suite.restart_path())) {
    read_snapshot(suite.restart_path());
    return RunState::Restartable;
  }
  throw Error(ErrorCode::CorruptRestart,
              "output files for '" + suite.prefix.string() + "' exist but hold neither a complete run nor a restart point");
}

void remove_suite(const OutputSuite& suite) {
  for (const auto& p : {suite.chain_path(), suite.sample_path(), suite.report_path(), suite.progress_path(),
                        suite.restart_path()}) {
    std::error_code ec;
    fs::remove(p, ec);
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_failure(path, "cannot create");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) io_failure(path, "write failed");
}

}  // namespace paradram
