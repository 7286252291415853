#include "doctest.h"

#include <string>

#include "helpers.hpp"
#include "pccforge/dataset.hpp"

using namespace pccforge;
using testutil::TempDir;
using testutil::load_schema;
using testutil::matches_schema;
using testutil::run_cli;
using testutil::slurp;
using testutil::spit;
using json = nlohmann::json;

namespace {

void write_source(const TempDir& tmp) {
  spit(tmp / "scan.txt",
       "0 0 0 wall\n"
       "1 0 0 door\n"
       "0 1 0 door\n"
       "1 1 0 window\n"
       "0.5 0.5 1 wall\n"
       "0.25 0.75 0.5 carpet\n");
  spit(tmp / "map.csv",
       "source_dataset,source_key,target_id\n"
       "enfield,wall,0\n"
       "enfield,door,2\n"
       "enfield,window,5\n");
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("version and help always succeed") {
  const auto version = run_cli("--version");
  CHECK(version.exit_code == 0);
  CHECK(version.out.find("pccforge") != std::string::npos);

  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("convert --help").exit_code == 0);
  CHECK(run_cli("eval --help").exit_code == 0);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("--no-such-flag").exit_code == 2);
  CHECK(run_cli("convert").exit_code == 2);  // missing required options
  CHECK(run_cli("split --config nope --root /tmp").exit_code == 2);
  CHECK(run_cli("stats --root /tmp --threads horses").exit_code == 2);
  CHECK(run_cli("convert --format xyzl --input a --mapping b --sequence 07 "
                "--frobnicate --root /tmp")
            .exit_code == 2);
  // data behind a valid command line that lacks --root
  TempDir tmp;
  write_source(tmp);
  const auto no_root =
      run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
              " --mapping " + q(tmp / "map.csv") + " --sequence 07");
  CHECK(no_root.exit_code == 2);
  CHECK(no_root.err.find("--root") != std::string::npos);
}

TEST_CASE("missing input files exit with code 4") {
  TempDir tmp;
  write_source(tmp);
  const auto r =
      run_cli("convert --format xyzl --input " + q(tmp / "nothere.txt") +
              " --mapping " + q(tmp / "map.csv") + " --sequence 00 --root " +
              q(tmp / "out"));
  CHECK(r.exit_code == 4);
}

TEST_CASE("malformed data exits with code 3") {
  TempDir tmp;
  write_source(tmp);
  spit(tmp / "bad.csv", "wrong,header,here\na,b,1\n");
  const auto r =
      run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
              " --mapping " + q(tmp / "bad.csv") + " --sequence 00 --root " +
              q(tmp / "out"));
  CHECK(r.exit_code == 3);
}

TEST_CASE("convert emits a schema-valid report and builds the sequence") {
  TempDir tmp;
  write_source(tmp);
  const auto r =
      run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
              " --mapping " + q(tmp / "map.csv") + " --sequence 07 --root " +
              q(tmp / "out"));
  REQUIRE(r.exit_code == 0);

  const json report = json::parse(r.out);
  std::string why;
  CHECK_MESSAGE(matches_schema(report, load_schema("convert_report.schema.json"),
                               &why), why);
  CHECK(report["kept_points"] == 6);
  CHECK(report["unmapped_labels"] == 1);  // carpet
  CHECK(report["sequence"] == "07");
  CHECK(std::filesystem::file_size(tmp / "out/sequences/07/velodyne/000000.bin") ==
        96);

  // converting the same sequence again is a data error
  const auto again =
      run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
              " --mapping " + q(tmp / "map.csv") + " --sequence 07 --root " +
              q(tmp / "out"));
  CHECK(again.exit_code == 3);
}

TEST_CASE("remap reports rule and key counts") {
  TempDir tmp;
  write_source(tmp);
  const auto r = run_cli("remap --mapping " + q(tmp / "map.csv") + " --input " +
                         q(tmp / "scan.txt") + " --format xyzl");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  std::string why;
  CHECK_MESSAGE(matches_schema(report, load_schema("remap_report.schema.json"),
                               &why), why);
  CHECK(report["source_dataset"] == "enfield");
  CHECK(report["rule_count"] == 3);
  CHECK(report["total_points"] == 6);
  CHECK(report["total_unmapped"] == 1);
}

TEST_CASE("split writes list files and surfaces warnings") {
  TempDir tmp;
  const auto r = run_cli("split --config combined --root " + q(tmp / "out"));
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  std::string why;
  CHECK_MESSAGE(matches_schema(report, load_schema("split_report.schema.json"),
                               &why), why);
  CHECK(report["train_count"] == 75);
  CHECK(report["val_count"] == 1);
  CHECK(report["test_count"] == 74);
  CHECK(report["warnings"].size() == 2);
  CHECK(r.err.find("87") != std::string::npos);

  const std::string val = slurp(tmp / "out/splits/combined/val.txt");
  CHECK(val == "59\n");
}

TEST_CASE("the full pipeline produces schema-valid reports") {
  TempDir tmp;
  write_source(tmp);
  const std::string common = " --mapping " + q(tmp / "map.csv") + " --root " +
                             q(tmp / "out");
  REQUIRE(run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
                  " --sequence 00" + common)
              .exit_code == 0);
  REQUIRE(run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
                  " --sequence 01" + common)
              .exit_code == 0);

  const auto stats = run_cli("stats --root " + q(tmp / "out"));
  REQUIRE(stats.exit_code == 0);
  const json stats_report = json::parse(stats.out);
  std::string why;
  CHECK_MESSAGE(matches_schema(stats_report,
                               load_schema("stats_report.schema.json"), &why),
                why);
  CHECK(stats_report["total_points"] == 12);
  CHECK(stats_report["sequences"].size() == 2);
  CHECK(slurp(tmp / "out/reports/distribution.csv")
            .find("label,class_name,count,percent") == 0);

  const auto geom = run_cli("geom --root " + q(tmp / "out") + " --k 3");
  REQUIRE(geom.exit_code == 0);
  const json geom_report = json::parse(geom.out);
  CHECK_MESSAGE(
      matches_schema(geom_report, load_schema("geom_report.schema.json"), &why),
      why);
  const auto record_schema = load_schema("geom_record.schema.json");
  std::istringstream lines(slurp(tmp / "out/reports/geometry.jsonl"));
  std::string line;
  std::size_t records = 0;
  while (std::getline(lines, line)) {
    const json record = json::parse(line);
    CHECK_MESSAGE(matches_schema(record, record_schema, &why), why);
    ++records;
  }
  CHECK(records == 2);
  CHECK(slurp(tmp / "out/reports/hist_height.csv")
            .find("bin_start,bin_end,count") == 0);

  const auto eval = run_cli("eval --gt " + q(tmp / "out") + " --pred " +
                            q(tmp / "out") + " --seqs 00 01");
  REQUIRE(eval.exit_code == 0);
  const json eval_report = json::parse(eval.out);
  CHECK_MESSAGE(
      matches_schema(eval_report, load_schema("eval_summary.schema.json"), &why),
      why);
  CHECK(eval_report["mean_accuracy"] == 1.0);
  CHECK(eval_report["total_points"] == 12);
  CHECK(json::parse(slurp(tmp / "out/reports/eval_summary.json")) ==
        eval_report);
  CHECK(slurp(tmp / "out/reports/per_class.csv")
            .find("label,class_name,tp,fp,fn,iou,accuracy") == 0);
}

TEST_CASE("eval with a single sequence id from the worked example") {
  TempDir tmp;
  write_source(tmp);
  REQUIRE(run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
                  " --mapping " + q(tmp / "map.csv") + " --sequence 07 --root " +
                  q(tmp / "out"))
              .exit_code == 0);
  const auto eval = run_cli("eval --gt " + q(tmp / "out") + " --pred " +
                            q(tmp / "out") + " --seqs 07");
  REQUIRE(eval.exit_code == 0);
  CHECK(json::parse(eval.out)["mean_accuracy"] == 1.0);
}

TEST_CASE("emit-train-config writes a manifest that round-trips") {
  TempDir tmp;
  const auto path = tmp / "train.cfg";
  const auto r = run_cli("emit-train-config --config memphis-only --out " +
                         q(path));
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["hyperparameters"]["lr_decay"] == 0.98477);
  CHECK(slurp(path).find("lr_decay: 0.98477\n") != std::string::npos);

  const auto parsed = dataset::parse_training_config(path);
  CHECK(parsed.split.config == dataset::SplitConfig::MemphisOnly);
  CHECK(parsed.hp.momentum == 0.98);
}

TEST_CASE("stats honors a custom output path") {
  TempDir tmp;
  write_source(tmp);
  REQUIRE(run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
                  " --mapping " + q(tmp / "map.csv") + " --sequence 00 --root " +
                  q(tmp / "out"))
              .exit_code == 0);
  const auto r = run_cli("stats --root " + q(tmp / "out") + " --out " +
                         q(tmp / "custom.csv"));
  REQUIRE(r.exit_code == 0);
  CHECK(std::filesystem::exists(tmp / "custom.csv"));
}

TEST_CASE("timestamps appear only with --stamp") {
  TempDir tmp;
  const auto plain = run_cli("split --config memphis-only --root " +
                             q(tmp / "a"));
  REQUIRE(plain.exit_code == 0);
  CHECK_FALSE(json::parse(plain.out).contains("generated_at"));

  const auto stamped = run_cli("split --config memphis-only --root " +
                               q(tmp / "b") + " --stamp");
  REQUIRE(stamped.exit_code == 0);
  const json report = json::parse(stamped.out);
  REQUIRE(report.contains("generated_at"));
  std::string why;
  CHECK_MESSAGE(matches_schema(report, load_schema("split_report.schema.json"),
                               &why), why);
}

TEST_CASE("identical invocations give byte-identical outputs") {
  TempDir tmp;
  write_source(tmp);
  auto build = [&](const std::string& root, int threads) {
    REQUIRE(run_cli("convert --format xyzl --input " + q(tmp / "scan.txt") +
                    " --mapping " + q(tmp / "map.csv") +
                    " --sequence 00 --root " + q(tmp / root) + " --threads " +
                    std::to_string(threads))
                .exit_code == 0);
    REQUIRE(run_cli("stats --root " + q(tmp / root) + " --threads " +
                    std::to_string(threads))
                .exit_code == 0);
  };
  build("t1", 1);
  build("t4", 4);
  std::string why;
  CHECK_MESSAGE(testutil::same_tree(tmp / "t1", tmp / "t4", &why), why);
}

TEST_CASE("quiet logging silences warnings") {
  TempDir tmp;
  const char* prev = std::getenv("PCCFORGE_LOG");
  setenv("PCCFORGE_LOG", "quiet", 1);
  const auto r = run_cli("split --config combined --root " + q(tmp / "out"));
  if (prev == nullptr) {
    unsetenv("PCCFORGE_LOG");
  } else {
    setenv("PCCFORGE_LOG", prev, 1);
  }
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.empty());
  // the warnings still live in the report itself
  CHECK(json::parse(r.out)["warnings"].size() == 2);
}
