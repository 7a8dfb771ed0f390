#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paradram/chain.hpp"
#include "paradram/kernel.hpp"
#include "paradram/refine.hpp"

namespace paradram {

enum class ChainFormat { Ascii, Binary };

std::string_view to_string(ChainFormat format) noexcept;
ChainFormat parse_chain_format(std::string_view text);

/// Paths of one simulation's output files, all derived from a prefix.
struct OutputSuite {
  std::filesystem::path prefix;
  ChainFormat format = ChainFormat::Ascii;
  char delimiter = ',';

  std::filesystem::path chain_path() const;
  std::filesystem::path sample_path() const;
  std::filesystem::path report_path() const;
  std::filesystem::path progress_path() const;
  std::filesystem::path restart_path() const;

  /// Sub-suite for multi-chain member `index` (0-based): `<prefix>_process_<index+1>`.
  OutputSuite member(std::size_t index) const;

  void validate() const;
};

inline constexpr std::string_view kChainMagic = "PARADRAM";
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kAsciiVersionLine = "# format: v1";
inline constexpr std::string_view kReportTerminator = "# end of report";

/// 17 significant digits, shortest exponent form; round-trips every double.
std::string format_real(double value);

std::string chain_header(const std::vector<std::string>& variableNames, char delimiter);
std::string format_chain_row(const ChainRow& row, char delimiter);

/// Bytes of one binary record: u32, u32, f64, f64, u64, u64, f64, d x f64.
constexpr std::size_t binary_record_size(int dimension) noexcept {
  return 4 + 4 + 8 + 8 + 8 + 8 + 8 + 8 * static_cast<std::size_t>(dimension);
}

/// Appends rows to a chain file in either codec. Opening with
/// `truncateTo` resumes an existing file: everything past that byte offset
/// (a partially written tail) is discarded first.
class ChainWriter {
 public:
  ChainWriter(const std::filesystem::path& path, ChainFormat format, char delimiter,
              const std::vector<std::string>& variableNames);
  ChainWriter(const std::filesystem::path& path, ChainFormat format, char delimiter, std::uint64_t truncateTo);

  void write(const ChainRow& row);
  void flush();
  std::uint64_t bytes_written() const noexcept { return bytes_; }

 private:
  void put(std::string_view bytes);

  std::ofstream out_;
  ChainFormat format_;
  char delimiter_;
  std::uint64_t bytes_ = 0;
};

/// Contents of a chain file plus the layout facts needed to resume it.
struct ChainFile {
  CompactChain chain;
  ChainFormat format = ChainFormat::Ascii;
  char delimiter = ',';
  std::vector<std::uint64_t> rowEndOffsets;  // byte offset just past each row
};

/// Reads either codec (detected from the first bytes), or a `_sample.txt`
/// file as unit-weight rows. A trailing partial row is an error unless
/// `allowPartialTail`, in which case it is ignored.
ChainFile read_chain_file(const std::filesystem::path& path, bool allowPartialTail = false);
inline CompactChain read_chain(const std::filesystem::path& path) { return read_chain_file(path).chain; }

void write_chain(const std::filesystem::path& path, const CompactChain& chain, ChainFormat format,
                 char delimiter = ',');

/// One line per progress tick; the elapsed column is left empty when absent.
std::string progress_header(char delimiter);
std::string format_progress(const ProgressTick& tick, std::optional<double> elapsedSeconds, char delimiter);

/// `SampleLogFunc,<vars>` then one row per refined point.
void write_sample(const std::filesystem::path& path, const RefinedSample& sample,
                  const std::vector<std::string>& variableNames, char delimiter = ',');

/// Everything a resumed run needs besides the chain rows themselves.
struct RestartSnapshot {
  std::uint32_t formatVersion = kFormatVersion;
  std::uint64_t specDigest = 0;
  char delimiter = ',';
  std::uint64_t chainBytes = 0;     // chain file length at the snapshot
  std::uint64_t rowsWritten = 0;    // compact rows in the chain file
  std::uint64_t progressBytes = 0;  // progress file length at the snapshot
  std::string samplerState;         // Sampler::save, including its round strategy
};

std::string encode_snapshot(const RestartSnapshot& snapshot);
/// Throws CorruptRestart on bad magic, version, length or checksum.
RestartSnapshot decode_snapshot(std::string_view bytes);

/// Write-new-then-rename, so a crash mid-write leaves the previous snapshot.
void write_snapshot(const std::filesystem::path& path, const RestartSnapshot& snapshot);
RestartSnapshot read_snapshot(const std::filesystem::path& path);

enum class RunState { Fresh, Restartable, Complete };
std::string_view to_string(RunState state) noexcept;

/// Fresh: none of the suite's files exist. Complete: the report ends with the
/// terminator. Restartable: chain and a valid restart file exist. Anything
/// else (leftovers that cannot be resumed) is CorruptRestart.
RunState detect_incomplete(const OutputSuite& suite);

/// Removes every file of the suite that exists.
void remove_suite(const OutputSuite& suite);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace paradram
