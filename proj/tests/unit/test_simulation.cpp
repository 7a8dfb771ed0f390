#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "paradram/error.hpp"
#include "paradram/report.hpp"
#include "paradram/simulation.hpp"

using namespace paradram;
namespace fs = std::filesystem;

namespace {

struct Crash {};

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "paradram_test_simulation" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Reports echo the output prefix, which differs between compared runs.
std::string without_prefix(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);)
    if (!line.starts_with("out = ")) out += line + "\n";
  return out;
}

SimulationSpec spec_for(const fs::path& prefix, const std::string& extra = {}) {
  auto spec = parse_config_text(
      "target = mvn\n"
      "dim = 2\n"
      "cov = 1,0.5,0.5,2\n"
      "chain-len = 3000\n"
      "seed = 11\n"
      "deterministic-test-mode = true\n" +
      extra);
  spec.outputs.prefix = prefix;
  return spec;
}

void crash_at(const SimulationSpec& spec, std::uint64_t row) {
  SimulationHooks hooks;
  hooks.afterRow = [row](std::uint64_t written) {
    if (written == row) throw Crash{};
  };
  CHECK_THROWS_AS(run_simulation(spec, hooks), Crash);
}

}  // namespace

TEST_CASE("serial run writes the full suite") {
  const auto dir = fresh_dir("suite");
  const auto spec = spec_for(dir / "run1");
  const auto result = run_simulation(spec);
  CHECK(result.disposition == RunDisposition::Completed);
  const auto& s = spec.outputs;
  for (const auto& p : {s.chain_path(), s.sample_path(), s.report_path(), s.progress_path(), s.restart_path()})
    CHECK(fs::exists(p));
  const auto report = slurp(s.report_path());
  CHECK(report.ends_with(std::string(kReportTerminator) + "\n"));
  for (const auto& field : spec_fields()) {
    std::size_t hits = 0;
    for (std::size_t at = report.find("\n" + std::string(field.key) + " = "); at != std::string::npos;
         at = report.find("\n" + std::string(field.key) + " = ", at + 1))
      ++hits;
    CHECK_MESSAGE(hits == 1, field.key);
  }
  CHECK(report_value(report, "mode") == "serial");
  CHECK(report_value(report, "scope") == "serial");
  CHECK(report_table(report, "speedup").size() == 13);  // P = 1, 2, 4, ..., 4096

  const auto progress = slurp(s.progress_path());
  const auto line2 = progress.substr(progress.find('\n') + 1);
  CHECK(line2.starts_with("1000,"));

  const auto chain = read_chain(s.chain_path());
  CHECK(chain.size() == 3000);
  const auto sample = slurp(s.sample_path());
  const auto lines = std::count(sample.begin(), sample.end(), '\n') - 1;
  CHECK(std::to_string(lines) == report_value(report, "refined_sample_size"));
}

TEST_CASE("completed runs are refused unless forced") {
  const auto dir = fresh_dir("refuse");
  auto spec = spec_for(dir / "r");
  (void)run_simulation(spec);
  const auto before = slurp(spec.outputs.chain_path());
  CHECK(run_simulation(spec).disposition == RunDisposition::Refused);
  CHECK(slurp(spec.outputs.chain_path()) == before);
  spec.forceOverwrite = true;
  CHECK(run_simulation(spec).disposition == RunDisposition::Completed);
  CHECK(slurp(spec.outputs.chain_path()) == before);
}

TEST_CASE("missing output directories are created") {
  const auto dir = fresh_dir("nested");
  const auto spec = spec_for(dir / "a" / "b" / "run");
  CHECK(run_simulation(spec).disposition == RunDisposition::Completed);
  CHECK(fs::exists(spec.outputs.chain_path()));
}

TEST_CASE("deterministic mode output is reproducible") {
  const auto dir = fresh_dir("determinism");
  const auto a = spec_for(dir / "a");
  const auto b = spec_for(dir / "b");
  (void)run_simulation(a);
  (void)run_simulation(b);
  for (auto path : {&OutputSuite::chain_path, &OutputSuite::sample_path, &OutputSuite::progress_path})
    CHECK(slurp((a.outputs.*path)()) == slurp((b.outputs.*path)()));
}

TEST_CASE("interrupted runs resume to the uninterrupted bytes") {
  for (const std::string format : {"ascii", "binary"}) {
    const auto dir = fresh_dir("restart_" + format);
    const auto reference = spec_for(dir / "ref", "format = " + format + "\n");
    (void)run_simulation(reference);
    std::mt19937_64 rng(format.size());
    std::uniform_int_distribution<std::uint64_t> row(1, 2999);
    for (int k = 0; k < 20; ++k) {
      const auto spec = spec_for(dir / ("k" + std::to_string(k)), "format = " + format + "\n");
      crash_at(spec, row(rng));
      if (k % 2 == 1) {
        std::ofstream junk(spec.outputs.chain_path(), std::ios::app | std::ios::binary);
        junk << "7,0,0.3";
      }
      CHECK(detect_run_state(spec) == RunState::Restartable);
      CHECK(run_simulation(spec).disposition == RunDisposition::Resumed);
      for (auto path : {&OutputSuite::chain_path, &OutputSuite::sample_path, &OutputSuite::progress_path})
        CHECK(slurp((spec.outputs.*path)()) == slurp((reference.outputs.*path)()));
      CHECK(without_prefix(slurp(spec.outputs.report_path())) == without_prefix(slurp(reference.outputs.report_path())));
    }
  }
}

TEST_CASE("repeated interruptions") {
  const auto dir = fresh_dir("repeated");
  const auto reference = spec_for(dir / "ref");
  (void)run_simulation(reference);
  const auto spec = spec_for(dir / "x");
  for (std::uint64_t at : {100, 900, 1500, 2999}) crash_at(spec, at);
  CHECK(run_simulation(spec).disposition == RunDisposition::Resumed);
  CHECK(slurp(spec.outputs.chain_path()) == slurp(reference.outputs.chain_path()));
}

TEST_CASE("digest scope on resume") {
  const auto dir = fresh_dir("digest");
  const auto longer = spec_for(dir / "long", "chain-len = 4000\n");
  (void)run_simulation(longer);

  auto spec = spec_for(dir / "x");
  crash_at(spec, 1200);
  spec.kernel.chainLengthTarget = 4000;
  spec.outputs.delimiter = ';';
  CHECK(run_simulation(spec).disposition == RunDisposition::Resumed);
  CHECK(slurp(spec.outputs.chain_path()) == slurp(longer.outputs.chain_path()));

  auto other = spec_for(dir / "y");
  crash_at(other, 500);
  auto changed = spec_for(dir / "y", "dim = 3\ncov = 1,0,0,0,1,0,0,0,1\n");
  try {
    (void)run_simulation(changed);
    FAIL("expected SpecMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpecMismatch);
  }
}

TEST_CASE("fork-join and multichain runs resume exactly") {
  const auto dir = fresh_dir("parallel");
  for (const std::string mode : {"mode = forkjoin\ncount = 4\nthreads = 2\n", "mode = multichain\ncount = 3\nthreads = 3\n"}) {
    const auto tag = mode.substr(7, 4);
    const auto reference = spec_for(dir / (tag + "_ref"), mode);
    (void)run_simulation(reference);
    const auto spec = spec_for(dir / (tag + "_x"), mode);
    crash_at(spec, 1700);
    CHECK(run_simulation(spec).disposition == RunDisposition::Resumed);
    const std::size_t members = reference.mode == ParallelMode::MultiChain ? 3 : 1;
    for (std::size_t i = 0; i < members; ++i) {
      const auto a = members > 1 ? reference.outputs.member(i) : reference.outputs;
      const auto b = members > 1 ? spec.outputs.member(i) : spec.outputs;
      CHECK(slurp(a.chain_path()) == slurp(b.chain_path()));
    }
    CHECK(without_prefix(slurp(reference.outputs.report_path())) == without_prefix(slurp(spec.outputs.report_path())));
  }
}

TEST_CASE("multichain with one chain equals the serial run") {
  const auto dir = fresh_dir("mc1");
  const auto serial = spec_for(dir / "s");
  const auto mc = spec_for(dir / "m", "mode = multichain\ncount = 1\n");
  (void)run_simulation(serial);
  (void)run_simulation(mc);
  CHECK(slurp(serial.outputs.chain_path()) == slurp(mc.outputs.member(0).chain_path()));
}

TEST_CASE("invalid specs") {
  auto spec = spec_for(fresh_dir("invalid") / "x");
  spec.target.dimension = 0;
  try {
    spec.validate();
    FAIL("expected BadDimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadDimension);
    CHECK(std::string(e.what()).find("dim must be a positive integer") != std::string::npos);
  }
  auto serialCount = spec_for("x", "count = 2\n");
  CHECK_THROWS_AS(serialCount.validate(), Error);
}
