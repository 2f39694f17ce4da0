#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <random>
#include <sstream>

#include "app.hpp"
#include "fixtures.hpp"

namespace fpirt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("fpirt_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"fpirt"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

const char* const kHeader =
    "examiner_id,item_id,mating,latent_value,compare_value,inconclusive_reason,exclusion_reason,difficulty\n";

/// Small simulated dataset written by the simulate command itself.
fs::path simulated(const TempDir& t, const std::string& model, const std::string& name) {
  const auto dir = t / name;
  const auto r = run({"simulate", "--model", model, "--examiners", "12", "--items", "16", "--per-examiner", "10",
                      "--seed", "5", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "dataset.csv";
}

TEST(Cli, Sha256KnownVector) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, IngestQuarantinesMalformedRows) {
  TempDir t;
  spit(t / "in.csv", std::string(kHeader) +
                         "E1,I1,Mates,VID,Individualization,,,Easy\n"
                         "E1,I2,Mates,VID,Inconclusive,,,Easy\n"
                         "E2,I1,Non-mates,VID,Exclusion,,Minutiae,Easy\n");
  const auto r = run({"ingest", "--input", (t / "in.csv").string(), "--out", (t / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("quarantined rows: 1 of 3"), std::string::npos) << r.out;
  const auto q = slurp(t / "o" / "quarantine.jsonl");
  EXPECT_NE(q.find("\"row\":3"), std::string::npos) << q;
  const auto meta = json::parse(slurp(t / "o" / "ingest.json"));
  EXPECT_EQ(meta.at("records").get<int>(), 2);
  EXPECT_EQ(meta.at("input_hash").get<std::string>().size(), 64u);
}

TEST(Cli, IngestRejectsEmptyAndHeaderlessInput) {
  TempDir t;
  spit(t / "empty.csv", "");
  EXPECT_EQ(run({"ingest", "--input", (t / "empty.csv").string()}).code, cli::kDataError);
  spit(t / "bad.csv", "a,b,c\n1,2,3\n");
  const auto r = run({"ingest", "--input", (t / "bad.csv").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("missing"), std::string::npos);
  EXPECT_EQ(run({"ingest", "--input", (t / "nope.csv").string()}).code, cli::kDataError);
}

TEST(Cli, UsageErrors) {
  TempDir t;
  const auto data = simulated(t, "rasch", "sim");
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"fit", "--model", "grm", "--input", data.string(), "--out", (t / "f").string()}).code, cli::kUsage);
  EXPECT_EQ(run({"fit", "--model", "rasch", "--input", data.string()}).code, cli::kUsage);
  EXPECT_EQ(run({"fit", "--scheme", "sometimes", "--input", data.string(), "--out", (t / "f").string()}).code,
            cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, FitIsDeterministicForAFixedSeed) {
  TempDir t;
  const auto data = simulated(t, "rasch", "sim");
  for (const char* out : {"a", "b"}) {
    const auto r = run({"fit", "--model", "rasch", "--input", data.string(), "--chains", "2", "--warmup", "100",
                        "--samples", "100", "--seed", "9", "--rhat-threshold", "10", "--out", (t / out).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(t / "a" / "summary.json"), slurp(t / "b" / "summary.json"));
  EXPECT_EQ(slurp(t / "a" / "draws.csv"), slurp(t / "b" / "draws.csv"));
  for (const char* f : {"metadata.json", "waic.json", "proficiency.csv", "predictive_scores.csv"}) {
    EXPECT_TRUE(fs::exists(t / "a" / f)) << f;
  }
  const auto meta = json::parse(slurp(t / "a" / "metadata.json"));
  EXPECT_EQ(meta.at("method").get<std::string>(), "nuts");
  EXPECT_EQ(meta.at("observation_scale").get<std::string>(), "scored:InconclusiveMCAR");
}

TEST(Cli, MapFitAndDiagnoseWithTruth) {
  TempDir t;
  const auto data = simulated(t, "rasch", "sim");
  const auto r = run({"fit", "--map", "--model", "rasch", "--input", data.string(), "--chains", "2", "--samples",
                      "200", "--out", (t / "m").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(slurp(t / "m" / "metadata.json")).at("method").get<std::string>(), "laplace");
  const auto n = run({"fit", "--model", "rasch", "--input", data.string(), "--chains", "2", "--warmup", "100",
                      "--samples", "100", "--rhat-threshold", "10", "--out", (t / "n").string()});
  ASSERT_EQ(n.code, 0) << n.err;
  const auto d = run({"diagnose", "--fit", (t / "n").string(), "--truth", (t / "sim" / "truth.json").string(),
                      "--rhat-threshold", "10"});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NE(d.out.find("recovery theta"), std::string::npos) << d.out;
  EXPECT_TRUE(fs::exists(t / "n" / "recovery.csv"));
}

TEST(Cli, CompareSingleFitAndMismatchedDatasets) {
  TempDir t;
  const auto a = simulated(t, "irtree", "sa");
  const auto other = t / "sb";
  ASSERT_EQ(run({"simulate", "--model", "irtree", "--examiners", "12", "--items", "16", "--per-examiner", "10",
                 "--seed", "6", "--out", other.string()})
                .code,
            0);
  for (auto [data, out] : {std::pair{a, t / "fa"}, std::pair{other / "dataset.csv", t / "fb"}}) {
    const auto r = run({"fit", "--map", "--model", "irtree", "--input", data.string(), "--chains", "1",
                        "--samples", "100", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto one = run({"--format", "csv", "compare", (t / "fa").string()});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(std::count(one.out.begin(), one.out.end(), '\n'), 2);
  const auto mixed = run({"compare", (t / "fa").string(), (t / "fb").string()});
  EXPECT_EQ(mixed.code, cli::kDataError);
  EXPECT_NE(mixed.err.find("different dataset"), std::string::npos);
}

TEST(Cli, CompareRejectsDifferentObservationScales) {
  TempDir t;
  const auto data = simulated(t, "rasch", "sim");
  for (const char* scheme : {"mcar", "incorrect"}) {
    const auto r = run({"fit", "--map", "--model", "rasch", "--scheme", scheme, "--input", data.string(),
                        "--chains", "1", "--samples", "50", "--out", (t / scheme).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(run({"compare", (t / "mcar").string(), (t / "incorrect").string()}).code, cli::kDataError);
}

TEST(Cli, AnswerKeyNamesMissingFit) {
  TempDir t;
  const auto data = simulated(t, "ltrm", "sim");
  const auto r = run({"answerkey", "--input", data.string(), "--ltrm", (t / "x").string(), "--cltrm",
                      (t / "x").string(), "--altrm", (t / "x").string(), "--out", (t / "k").string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("irtree-key"), std::string::npos) << r.err;
  const auto m = run({"answerkey", "--input", data.string(), "--ltrm", (t / "x").string(), "--cltrm",
                      (t / "x").string(), "--altrm", (t / "x").string(), "--irtree-key", (t / "x").string(),
                      "--out", (t / "k").string()});
  EXPECT_EQ(m.code, cli::kDataError);
  EXPECT_NE(m.err.find("missing ltrm fit"), std::string::npos) << m.err;
}

TEST(Cli, AnswerKeyOnUnanimousResponses) {
  // Every examiner gives the same answer on each item, so all keys agree.
  TempDir t;
  std::string csv = kHeader;
  for (const auto& e : testing::ids("E", 6)) {
    csv += e + ",I001,Mates,VID,Individualization,,,Easy\n";
    csv += e + ",I002,Mates,NV,,,,\n";
    csv += e + ",I003,Non-mates,VID,Exclusion,,Minutiae,Easy\n";
    csv += e + ",I004,Mates,NV,,,,\n";
  }
  spit(t / "in.csv", csv);
  const auto in = (t / "in.csv").string();
  for (const char* model : {"ltrm", "cltrm", "altrm", "irtree-key"}) {
    const auto r = run({"fit", "--map", "--model", model, "--input", in, "--chains", "1", "--samples", "200",
                        "--out", (t / model).string()});
    ASSERT_EQ(r.code, 0) << model << ": " << r.err;
  }
  const auto r = run({"answerkey", "--input", in, "--ltrm", (t / "ltrm").string(), "--cltrm",
                      (t / "cltrm").string(), "--altrm", (t / "altrm").string(), "--irtree-key",
                      (t / "irtree-key").string(), "--out", (t / "k").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto modal = slurp(t / "k" / "key_modal.csv");
  EXPECT_NE(modal.find("I002,NoValue"), std::string::npos) << modal;
  const auto strip_source = [](std::string s) {
    std::string o;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) o += line.substr(0, line.find(',', line.find(',') + 1)) + "\n";
    return o;
  };
  for (const char* f : {"key_ltrm.csv", "key_cltrm.csv", "key_altrm.csv", "key_irtree.csv"}) {
    EXPECT_EQ(strip_source(slurp(t / "k" / f)), strip_source(modal)) << f;
  }
  const auto matrix = slurp(t / "k" / "disagreement_matrix.csv");
  std::istringstream rows(matrix);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    const auto cells = line.substr(line.find(',') + 1);
    EXPECT_EQ(cells.find_first_not_of("0,"), std::string::npos) << line;
  }
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  TempDir t;
  const auto data = simulated(t, "rasch", "sim");
  spit(t / "run.ini", "model=rasch\nchains=3\nsamples=40\nmap=true\n");
  const auto r = run({"--config", (t / "run.ini").string(), "fit", "--input", data.string(), "--chains", "2",
                      "--out", (t / "f").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto meta = json::parse(slurp(t / "f" / "metadata.json"));
  EXPECT_EQ(meta.at("chains").get<int>(), 2);
  EXPECT_EQ(meta.at("samples").get<int>(), 40);
  EXPECT_EQ(meta.at("method").get<std::string>(), "laplace");
}

}  // namespace
}  // namespace fpirt
