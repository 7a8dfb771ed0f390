#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"
#include "paradram/persist.hpp"

using namespace paradram;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "paradram_test_persist";
  fs::create_directories(dir);
  return dir / name;
}

CompactChain random_chain(int d, int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> w(1, 9);
  CompactChain c(d);
  for (int i = 0; i < rows; ++i) {
    ChainRow r;
    r.processId = 1 + static_cast<std::uint32_t>(i % 3);
    r.drStage = static_cast<std::uint32_t>(i % 2);
    r.meanAcceptanceRate = std::abs(std::sin(i + 1.0));
    r.adaptationMeasure = i % 7 == 0 ? std::abs(std::cos(i * 0.1)) / 3.0 : 0.0;
    r.burninLocation = static_cast<std::uint64_t>(i / 2);
    r.weight = static_cast<std::uint64_t>(w(rng));
    r.state.resize(d);
    for (auto& v : r.state) v = z(rng) * std::pow(10.0, i % 9 - 4);
    r.logFunc = i == 0 ? kMinusInfinity : -r.state.squaredNorm();
    c.append_or_increment(r);
  }
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("ascii row format") {
  ChainRow r;
  r.logFunc = -0.5 * std::log(2.0 * std::numbers::pi);
  r.state = Point::Zero(1);
  CHECK(format_chain_row(r, ',') == "1,0,1,0,0,1,-0.91893853320467267,0");
  CHECK(chain_header({"Var1", "Var2"}, '\t') ==
        "ProcessID\tDelayedRejectionStage\tMeanAcceptanceRate\tAdaptationMeasure\tBurninLocation\tSampleWeight\t"
        "SampleLogFunc\tVar1\tVar2");
}

TEST_CASE("binary record size") {
  CHECK(binary_record_size(4) == 80);
  CHECK(binary_record_size(1) == 56);
}

TEST_CASE("suite paths") {
  OutputSuite s{"out/run1", ChainFormat::Ascii, ','};
  CHECK(s.chain_path() == fs::path("out/run1_chain.txt"));
  CHECK(s.sample_path() == fs::path("out/run1_sample.txt"));
  CHECK(s.report_path() == fs::path("out/run1_report.txt"));
  CHECK(s.progress_path() == fs::path("out/run1_progress.txt"));
  CHECK(s.restart_path() == fs::path("out/run1_restart.bin"));
  s.format = ChainFormat::Binary;
  CHECK(s.chain_path() == fs::path("out/run1_chain.bin"));
  CHECK(s.member(1).prefix == fs::path("out/run1_process_2"));
  const OutputSuite noStem{"", ChainFormat::Ascii, ','};
  const OutputSuite numericDelimiter{"x", ChainFormat::Ascii, '1'};
  CHECK_THROWS_AS(noStem.validate(), Error);
  CHECK_THROWS_AS(numericDelimiter.validate(), Error);
}

TEST_CASE("chain codecs round-trip bitwise and agree") {
  for (int d : {1, 3}) {
    const auto chain = random_chain(d, 200, 40 + d);
    for (char delim : {',', '\t', ' '}) {
      const auto path = scratch("rt_ascii.txt");
      write_chain(path, chain, ChainFormat::Ascii, delim);
      const auto file = read_chain_file(path);
      CHECK(file.format == ChainFormat::Ascii);
      CHECK(file.delimiter == delim);
      CHECK(file.chain.rows() == chain.rows());
    }
    const auto bin = scratch("rt.bin");
    write_chain(bin, chain, ChainFormat::Binary);
    const auto file = read_chain_file(bin);
    CHECK(file.format == ChainFormat::Binary);
    CHECK(file.chain.rows() == chain.rows());
    CHECK(fs::file_size(bin) == file.rowEndOffsets.front() + (chain.size() - 1) * binary_record_size(d));
  }
}

TEST_CASE("partial tail") {
  const auto chain = random_chain(2, 20, 3);
  const auto path = scratch("tail.txt");
  write_chain(path, chain, ChainFormat::Ascii);
  {
    std::ofstream out(path, std::ios::app);
    out << "1,0,0.5,0,3";
  }
  CHECK_THROWS_AS(read_chain_file(path), Error);
  CHECK(read_chain_file(path, true).chain.rows() == chain.rows());
}

TEST_CASE("progress lines") {
  ProgressTick t{1000, 250, 0.25, 0.125};
  CHECK(progress_header(',') == "verboseLength,compactLength,meanAcceptanceRate,lastAdaptationMeasure,elapsedSeconds");
  CHECK(format_progress(t, std::nullopt, ',') == "1000,250,0.25,0.125,");
  CHECK(format_progress(t, 1.5, ',') == "1000,250,0.25,0.125,1.5");
}

TEST_CASE("snapshot encoding") {
  RestartSnapshot s;
  s.specDigest = 0x0123456789abcdefULL;
  s.delimiter = '\t';
  s.chainBytes = 4096;
  s.rowsWritten = 17;
  s.progressBytes = 99;
  s.samplerState = std::string("\0\1binary\xff", 10);
  const auto bytes = encode_snapshot(s);
  const auto back = decode_snapshot(bytes);
  CHECK(back.specDigest == s.specDigest);
  CHECK(back.delimiter == '\t');
  CHECK(back.chainBytes == 4096);
  CHECK(back.rowsWritten == 17);
  CHECK(back.progressBytes == 99);
  CHECK(back.samplerState == s.samplerState);

  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    auto bad = bytes;
    bad[i] = static_cast<char>(bad[i] ^ 0x40);
    CHECK_THROWS_AS(decode_snapshot(bad), Error);
  }
  CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, bytes.size() - 1)), Error);
}

TEST_CASE("snapshot writes replace atomically") {
  const auto path = scratch("snap.bin");
  RestartSnapshot a;
  a.rowsWritten = 1;
  write_snapshot(path, a);
  RestartSnapshot b;
  b.rowsWritten = 2;
  write_snapshot(path, b);
  CHECK(read_snapshot(path).rowsWritten == 2);
  for (const auto& e : fs::directory_iterator(path.parent_path()))
    CHECK(e.path().filename().string().find("snap.bin.") == std::string::npos);
}

TEST_CASE("detect incomplete runs") {
  const auto dir = scratch("detect");
  fs::remove_all(dir);
  fs::create_directories(dir);
  OutputSuite s{dir / "run", ChainFormat::Ascii, ','};
  CHECK(detect_incomplete(s) == RunState::Fresh);

  write_chain(s.chain_path(), random_chain(1, 5, 1), ChainFormat::Ascii);
  CHECK_THROWS_AS(detect_incomplete(s), Error);

  write_snapshot(s.restart_path(), RestartSnapshot{});
  CHECK(detect_incomplete(s) == RunState::Restartable);

  write_text_file(s.report_path(), "# partial\n");
  CHECK(detect_incomplete(s) == RunState::Restartable);

  write_text_file(s.report_path(), "# report\n" + std::string(kReportTerminator) + "\n");
  CHECK(detect_incomplete(s) == RunState::Complete);

  write_text_file(s.report_path(), "# partial\n");
  auto bytes = slurp(s.restart_path());
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 1);
  write_text_file(s.restart_path(), bytes);
  try {
    (void)detect_incomplete(s);
    FAIL("expected CorruptRestart");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptRestart);
  }

  remove_suite(s);
  CHECK(detect_incomplete(s) == RunState::Fresh);
}

TEST_CASE("byte helpers round-trip") {
  ByteWriter w;
  w.put<std::uint32_t>(7);
  w.put<std::uint64_t>(1ULL << 40);
  w.put<double>(-0.0);
  w.put<double>(kMinusInfinity);
  w.put_bytes("abc");
  ByteReader r(w.bytes());
  CHECK(r.get<std::uint32_t>() == 7);
  CHECK(r.get<std::uint64_t>() == (1ULL << 40));
  CHECK(std::signbit(r.get<double>()));
  CHECK(r.get<double>() == kMinusInfinity);
  CHECK(r.get_bytes(3) == "abc");
  CHECK(r.at_end());
  CHECK_THROWS_AS(r.get<std::uint32_t>(), Error);
}
