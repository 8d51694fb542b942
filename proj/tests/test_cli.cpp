#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <nlohmann/json.hpp>

#ifndef AVEC_CLI_PATH
#define AVEC_CLI_PATH "avec"
#endif

namespace {

using nlohmann::json;

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string out_path =
      (std::filesystem::temp_directory_path() / "avec_cli_out.txt").string();
  const std::string cmd =
      std::string(AVEC_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::stringstream buf;
  buf << in.rdbuf();
  return {WEXITSTATUS(raw), buf.str()};
}

std::string tiny_config_file() {
  const std::string path =
      (std::filesystem::temp_directory_path() / "avec_cli_config.json").string();
  json cfg{{"seed", 9},
           {"epochs", 1},
           {"warmup_epochs", 0},
           {"batch_size", 4},
           {"centroid_samples", 2},
           {"embed_dim", 8},
           {"depth", 1},
           {"heads", 2},
           {"projection_dim", 4},
           {"dataset_classes", 4},
           {"dataset_samples_per_class", 2}};
  std::ofstream out(path, std::ios::trunc);
  out << cfg.dump(2);
  return path;
}

}  // namespace

TEST_CASE("missing config files exit with the I/O code") {
  const CommandResult r = run_cli("train --config /nonexistent/config.json");
  CHECK(r.exit_code == 2);
}

TEST_CASE("unknown flags produce a usage failure") {
  const CommandResult r = run_cli("train --definitely-not-a-flag");
  CHECK(r.exit_code == 1);
}

TEST_CASE("unknown config keys are a validation failure") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "avec_cli_badcfg.json").string();
  std::ofstream(path) << "{\"seed\": 1, \"mystery_knob\": 3}";
  const CommandResult r = run_cli("train --config " + path);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("mystery_knob") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("augdump emits one parseable record per draw, deterministically") {
  const CommandResult a = run_cli("augdump --modality audio --seed 3 --count 4");
  const CommandResult b = run_cli("augdump --modality audio --seed 3 --count 4");
  CHECK(a.exit_code == 0);
  CHECK(a.output == b.output);
  std::istringstream lines(a.output);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json record = json::parse(line);
    CHECK(record.at("spec").at("modality") == "audio");
    CHECK(record.at("vector").size() == 24);
    ++count;
  }
  CHECK(count == 4);

  const CommandResult v = run_cli("augdump --modality visual --seed 3 --count 1");
  const json record = json::parse(v.output);
  CHECK(record.at("vector").size() == 18);
}

TEST_CASE("train then eval produces a retrieval report") {
  const std::string cfg_path = tiny_config_file();
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "avec_cli_run").string();
  std::filesystem::remove_all(out_dir);
  const CommandResult train =
      run_cli("train --config " + cfg_path + " --out " + out_dir);
  REQUIRE(train.exit_code == 0);
  CHECK(std::filesystem::exists(out_dir + "/checkpoint_final.avec"));
  CHECK(std::filesystem::exists(out_dir + "/metrics.jsonl"));

  // Metrics lines carry the documented fields.
  std::ifstream metrics(out_dir + "/metrics.jsonl");
  std::string first_line;
  REQUIRE(std::getline(metrics, first_line));
  const json m = json::parse(first_line);
  for (const char* key :
       {"step", "epoch", "lr", "loss_total", "loss_inter", "loss_intra_a",
        "loss_intra_v"}) {
    CHECK(m.contains(key));
  }

  const std::string eval_cmd = "eval --checkpoint " + out_dir +
                               "/checkpoint_final.avec --retrieval --gallery 8";
  const CommandResult eval1 = run_cli(eval_cmd);
  REQUIRE(eval1.exit_code == 0);
  const json report = json::parse(eval1.output);
  REQUIRE(report.contains("retrieval"));
  REQUIRE(report.at("retrieval").size() == 2);
  for (const json& r : report.at("retrieval")) {
    CHECK((r.at("direction") == "video_to_audio" || r.at("direction") == "audio_to_video"));
    CHECK(r.at("r1").get<double>() >= 0.0);
    CHECK(r.at("r1").get<double>() <= r.at("r10").get<double>());
    CHECK(r.at("gallery_size") == 8);
  }

  // Identical invocations print identical reports.
  const CommandResult eval2 = run_cli(eval_cmd);
  CHECK(eval1.output == eval2.output);

  std::filesystem::remove_all(out_dir);
  std::filesystem::remove(cfg_path);
}

TEST_CASE("eval on a truncated checkpoint exits with the I/O code") {
  const std::string cfg_path = tiny_config_file();
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "avec_cli_trunc").string();
  std::filesystem::remove_all(out_dir);
  REQUIRE(run_cli("train --config " + cfg_path + " --out " + out_dir).exit_code == 0);
  const std::string ckpt = out_dir + "/checkpoint_final.avec";
  const auto size = std::filesystem::file_size(ckpt);
  std::filesystem::resize_file(ckpt, size - 64);
  const CommandResult r = run_cli("eval --checkpoint " + ckpt + " --retrieval");
  CHECK(r.exit_code == 2);
  std::filesystem::remove_all(out_dir);
  std::filesystem::remove(cfg_path);
}
