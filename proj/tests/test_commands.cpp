#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asgl/commands.hpp"
#include "asgl/config.hpp"
#include "asgl/error.hpp"
#include "asgl/pose_io.hpp"
#include "asgl/synth.hpp"
#include "doctest.h"

using namespace asgl;

namespace {

std::string scratch_root() {
  return "/tmp/asgl_cmd_" + std::to_string(::getpid());
}

std::string scratch(const std::string& name) {
  const std::string dir = scratch_root() + "/" + name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

// A dataset small enough that a training step takes milliseconds.
RunConfig tiny_config() {
  RunConfig cfg;
  cfg.epochs = 2;
  cfg.batch_p = 2;
  cfg.batch_k = 2;
  cfg.clip_len = 4;
  cfg.stride = 2;
  cfg.refine_dims = {4, 8};
  cfg.gat_dims = {8};
  cfg.sta_channels = {8};
  cfg.heads = 2;
  cfg.partition_hops = 2;
  cfg.fused_dim = 8;
  cfg.appearance_dim = 8;
  cfg.synth_identities = 4;
  cfg.synth_tracklets = 4;
  cfg.synth_frames = 24;
  return cfg;
}

// Generates a dataset and returns its directory.
std::string make_dataset(const RunConfig& cfg, const std::string& name) {
  const std::string dir = scratch(name);
  std::ostringstream log;
  cmd_synth({dir}, cfg, log);
  return dir;
}

struct ErrorCatch {
  ErrorCode code = ErrorCode::dimension;
  std::string message;
};

template <typename Fn>
ErrorCatch capture_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  FAIL("expected an Error");
  return {};
}

}  // namespace

TEST_CASE("config values parse, override, and round-trip") {
  RunConfig cfg;
  CHECK(cfg.lr == 5e-3);
  CHECK(cfg.lambda1 == 0.7);
  CHECK(cfg.epochs == 120);

  apply_config_value(cfg, "lr", "0.25");
  apply_config_value(cfg, "refine_dims", "4, 8,16");
  apply_config_value(cfg, "circular_time", "true");
  apply_config_value(cfg, "mode", "f32");
  CHECK(cfg.lr == 0.25);
  CHECK(cfg.refine_dims == std::vector<std::size_t>{4, 8, 16});
  CHECK(cfg.circular_time);

  SUBCASE("the resolved dump parses back to the same text") {
    const std::string text = resolved_config_text(cfg);
    RunConfig back;
    const std::string path = scratch("cfg") + "/resolved.cfg";
    spit(path, text);
    apply_config_file(back, path);
    CHECK(resolved_config_text(back) == text);
  }

  SUBCASE("every documented key appears once in the dump") {
    const auto keys = config_keys();
    const std::string text = resolved_config_text(cfg);
    for (const auto& key : keys) {
      CHECK(text.find(key + " = ") != std::string::npos);
    }
    CHECK(std::set<std::string>(keys.begin(), keys.end()).size() ==
          keys.size());
  }

  SUBCASE("unknown keys are a hard error") {
    const auto err =
        capture_error([&] { apply_config_value(cfg, "learning_rate", "1"); });
    CHECK(err.code == ErrorCode::config);
    CHECK(err.message.find("learning_rate") != std::string::npos);
  }

  SUBCASE("malformed values name the key") {
    const auto err =
        capture_error([&] { apply_config_value(cfg, "epochs", "-3"); });
    CHECK(err.code == ErrorCode::config);
    CHECK(err.message.find("epochs") != std::string::npos);
    CHECK_THROWS_AS(apply_config_value(cfg, "lr", "fast"), Error);
    CHECK_THROWS_AS(apply_config_value(cfg, "use_gait", "yes"), Error);
    CHECK_THROWS_AS(apply_config_value(cfg, "mode", "f16"), Error);
    CHECK_THROWS_AS(apply_config_value(cfg, "refine_dims", "128,,512"),
                    Error);
    CHECK_THROWS_AS(apply_config_value(cfg, "refine_dims", "0"), Error);
  }

  SUBCASE("config files support comments and report line numbers") {
    const std::string dir = scratch("cfgfile");
    spit(dir + "/good.cfg",
         "# a comment\n\nlr = 0.125   # trailing comment\nseed = 9\n");
    RunConfig fresh;
    apply_config_file(fresh, dir + "/good.cfg");
    CHECK(fresh.lr == 0.125);
    CHECK(fresh.seed == 9);

    spit(dir + "/bad.cfg", "lr = 0.1\nwat\n");
    const auto err =
        capture_error([&] { apply_config_file(fresh, dir + "/bad.cfg"); });
    CHECK(err.code == ErrorCode::config);
    CHECK(err.message.find("bad.cfg:2") != std::string::npos);

    spit(dir + "/unknown.cfg", "\n\nlearning = 1\n");
    const auto err2 = capture_error(
        [&] { apply_config_file(fresh, dir + "/unknown.cfg"); });
    CHECK(err2.message.find("unknown.cfg:3") != std::string::npos);

    const auto err3 = capture_error(
        [&] { apply_config_file(fresh, dir + "/missing.cfg"); });
    CHECK(err3.code == ErrorCode::file);
  }
}

TEST_CASE("preprocess writes a store, an index, and provenance") {
  const RunConfig cfg = tiny_config();
  const std::string data = make_dataset(cfg, "pre_data");
  const std::string out_a = scratch("pre_a");
  const std::string out_b = scratch("pre_b");

  std::ostringstream log;
  cmd_preprocess({data + "/keypoints.jsonl", data + "/manifest.jsonl",
                  data + "/appearance.jsonl", out_a},
                 cfg, log);
  CHECK(log.str().find("16 tracklets") != std::string::npos);
  CHECK(std::filesystem::exists(out_a + "/clips.bin"));
  CHECK(std::filesystem::exists(out_a + "/resolved.cfg"));

  const auto index = nlohmann::json::parse(slurp(out_a + "/index.json"));
  REQUIRE(index.is_array());
  REQUIRE(index.size() == 16);
  CHECK(index[0]["tracklet_id"] == "p000_t0");
  CHECK(index[0]["split"] == "query");
  CHECK(index[0]["frames"] == 24);

  SUBCASE("re-running produces byte-identical outputs") {
    std::ostringstream log_b;
    cmd_preprocess({data + "/keypoints.jsonl", data + "/manifest.jsonl",
                    data + "/appearance.jsonl", out_b},
                   cfg, log_b);
    CHECK(slurp(out_a + "/clips.bin") == slurp(out_b + "/clips.bin"));
    CHECK(slurp(out_a + "/index.json") == slurp(out_b + "/index.json"));
    CHECK(slurp(out_a + "/resolved.cfg") == slurp(out_b + "/resolved.cfg"));
  }

  SUBCASE("the store feeds training in place of raw keypoints") {
    const ClipDataset from_store = load_dataset(
        out_a + "/clips.bin", data + "/manifest.jsonl", "");
    const ClipDataset from_raw = load_dataset(
        data + "/keypoints.jsonl", data + "/manifest.jsonl", "");
    REQUIRE(from_store.tracklets.size() == from_raw.tracklets.size());
    for (std::size_t i = 0; i < from_raw.tracklets.size(); ++i) {
      CHECK(from_store.tracklets[i].joints == from_raw.tracklets[i].joints);
    }
  }

  SUBCASE("an empty manifest warns and writes an empty store") {
    const std::string dir = scratch("pre_empty");
    spit(dir + "/manifest.jsonl", "");
    std::ostringstream warn_log;
    cmd_preprocess({data + "/keypoints.jsonl", dir + "/manifest.jsonl", "",
                    dir},
                   cfg, warn_log);
    CHECK(warn_log.str().find("warning") != std::string::npos);
    const auto empty_index = nlohmann::json::parse(slurp(dir + "/index.json"));
    CHECK(empty_index.is_array());
    CHECK(empty_index.empty());
    CHECK(load_dataset(dir + "/clips.bin", dir + "/manifest.jsonl", "")
              .tracklets.empty());
  }

  SUBCASE("a malformed keypoint record is an ingest error with its line") {
    const std::string dir = scratch("pre_bad");
    std::string text = slurp(data + "/keypoints.jsonl");
    const auto first_newline = text.find('\n');
    text.insert(first_newline + 1, "{\"tracklet_id\": 12}\n");
    spit(dir + "/keypoints.jsonl", text);
    const auto err = capture_error([&] {
      std::ostringstream silent;
      cmd_preprocess({dir + "/keypoints.jsonl", data + "/manifest.jsonl", "",
                      scratch("pre_bad_out")},
                     cfg, silent);
    });
    CHECK(err.code == ErrorCode::ingest);
    CHECK(err.message.find("line 2") != std::string::npos);
  }
}

TEST_CASE("training writes a checkpoint, a loss log, and provenance") {
  const RunConfig cfg = tiny_config();
  const std::string data = make_dataset(cfg, "train_data");
  const TrainArgs args{data + "/keypoints.jsonl", data + "/manifest.jsonl",
                       data + "/appearance.jsonl", scratch("train_a")};

  std::ostringstream log;
  cmd_train(args, cfg, log);
  CHECK(std::filesystem::exists(args.out_dir + "/model.ckpt"));
  CHECK(std::filesystem::exists(args.out_dir + "/resolved.cfg"));

  const std::string loss_log = slurp(args.out_dir + "/loss.log");
  CHECK(loss_log.find("epoch 0 ") != std::string::npos);
  CHECK(loss_log.find("epoch 1 ") != std::string::npos);
  CHECK(log.str().find("trained 2 epochs") != std::string::npos);

  SUBCASE("one epoch yields exactly one loss line") {
    RunConfig one = cfg;
    one.epochs = 1;
    const TrainArgs args_one{args.keypoints_path, args.manifest_path,
                             args.appearance_path, scratch("train_one")};
    std::ostringstream silent;
    cmd_train(args_one, one, silent);
    const std::string lines = slurp(args_one.out_dir + "/loss.log");
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 1);
    CHECK(lines.rfind("epoch 0 ", 0) == 0);
  }

  SUBCASE("the same seed reproduces logs and weights byte for byte") {
    const TrainArgs again{args.keypoints_path, args.manifest_path,
                          args.appearance_path, scratch("train_b")};
    std::ostringstream silent;
    cmd_train(again, cfg, silent);
    CHECK(slurp(again.out_dir + "/loss.log") ==
          slurp(args.out_dir + "/loss.log"));
    CHECK(slurp(again.out_dir + "/model.ckpt") ==
          slurp(args.out_dir + "/model.ckpt"));
  }

  SUBCASE("a different seed changes the loss trace") {
    RunConfig other = cfg;
    other.seed = 5;
    const TrainArgs again{args.keypoints_path, args.manifest_path,
                          args.appearance_path, scratch("train_seed5")};
    std::ostringstream silent;
    cmd_train(again, other, silent);
    CHECK(slurp(again.out_dir + "/loss.log") !=
          slurp(args.out_dir + "/loss.log"));
  }

  SUBCASE("with the metric loss off, the margin cannot matter") {
    RunConfig ce_only = cfg;
    ce_only.lambda2 = 0.0;
    ce_only.margin = 0.3;
    RunConfig ce_only_wide = ce_only;
    ce_only_wide.margin = 0.9;

    const TrainArgs run_a{args.keypoints_path, args.manifest_path,
                          args.appearance_path, scratch("train_l2a")};
    const TrainArgs run_b{args.keypoints_path, args.manifest_path,
                          args.appearance_path, scratch("train_l2b")};
    std::ostringstream silent;
    cmd_train(run_a, ce_only, silent);
    cmd_train(run_b, ce_only_wide, silent);
    CHECK(slurp(run_a.out_dir + "/loss.log") ==
          slurp(run_b.out_dir + "/loss.log"));
    CHECK(slurp(run_a.out_dir + "/model.ckpt") ==
          slurp(run_b.out_dir + "/model.ckpt"));

    // With the metric loss on, the same margin change must show up.
    RunConfig with_triplet = cfg;
    with_triplet.margin = 0.9;
    const TrainArgs run_c{args.keypoints_path, args.manifest_path,
                          args.appearance_path, scratch("train_l2c")};
    cmd_train(run_c, with_triplet, silent);
    CHECK(slurp(run_c.out_dir + "/loss.log") !=
          slurp(args.out_dir + "/loss.log"));
  }
}

TEST_CASE("embedding writes one JSONL record per selected tracklet") {
  const RunConfig cfg = tiny_config();
  const std::string data = make_dataset(cfg, "embed_data");
  const std::string run = scratch("embed_train");
  std::ostringstream silent;
  cmd_train({data + "/keypoints.jsonl", data + "/manifest.jsonl",
             data + "/appearance.jsonl", run},
            cfg, silent);

  EmbedArgs args{run + "/model.ckpt", data + "/keypoints.jsonl",
                 data + "/manifest.jsonl", data + "/appearance.jsonl",
                 scratch("embed_out")};
  RunConfig query_only = cfg;
  query_only.embed_split = "query";
  cmd_embed(args, query_only, silent);

  std::istringstream lines(slurp(args.out_dir + "/embeddings.jsonl"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto record = nlohmann::json::parse(line);
    CHECK(record["person_id"].is_string());
    CHECK(record["clothing_id"] == "c0");  // query tracklets wear c0
    CHECK(record["embedding"].size() == cfg.fused_dim);
    ++count;
  }
  CHECK(count == 4);

  SUBCASE("split all covers every tracklet") {
    EmbedArgs all_args = args;
    all_args.out_dir = scratch("embed_all");
    cmd_embed(all_args, cfg, silent);
    const std::string text = slurp(all_args.out_dir + "/embeddings.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 16);
  }

  SUBCASE("embedding twice is deterministic") {
    EmbedArgs again = args;
    again.out_dir = scratch("embed_again");
    cmd_embed(again, query_only, silent);
    CHECK(slurp(again.out_dir + "/embeddings.jsonl") ==
          slurp(args.out_dir + "/embeddings.jsonl"));
  }

  SUBCASE("a missing checkpoint is a file error") {
    EmbedArgs missing = args;
    missing.checkpoint_path = run + "/nope.ckpt";
    missing.out_dir = scratch("embed_missing");
    const auto err =
        capture_error([&] { cmd_embed(missing, query_only, silent); });
    CHECK(err.code == ErrorCode::file);
  }

  SUBCASE("a model trained on appearance vectors demands them") {
    EmbedArgs bare = args;
    bare.appearance_path = "";
    bare.out_dir = scratch("embed_bare");
    const auto err =
        capture_error([&] { cmd_embed(bare, query_only, silent); });
    CHECK(err.code == ErrorCode::config);
    CHECK(err.message.find("appearance") != std::string::npos);
  }
}

TEST_CASE("evaluation reports every requested protocol") {
  const RunConfig cfg = tiny_config();
  const std::string data = make_dataset(cfg, "eval_data");
  const std::string run = scratch("eval_train");
  std::ostringstream silent;
  cmd_train({data + "/keypoints.jsonl", data + "/manifest.jsonl",
             data + "/appearance.jsonl", run},
            cfg, silent);

  EvalArgs args{run + "/model.ckpt", data + "/keypoints.jsonl",
                data + "/manifest.jsonl", data + "/appearance.jsonl",
                scratch("eval_all")};
  RunConfig all = cfg;
  all.protocol = "all";
  std::ostringstream log;
  cmd_eval(args, all, log);

  const auto doc = nlohmann::json::parse(slurp(args.out_dir + "/report.json"));
  REQUIRE(doc["reports"].is_array());
  REQUIRE(doc["reports"].size() == 3);
  CHECK(doc["reports"][0]["protocol"] == "cc");
  CHECK(doc["reports"][1]["protocol"] == "standard");
  CHECK(doc["reports"][2]["protocol"] == "sc");
  for (const auto& report : doc["reports"]) {
    CHECK(report["num_queries"] == 4);
    const double r1 = report["rank1"];
    const double map = report["mAP"];
    CHECK(r1 >= 0.0);
    CHECK(r1 <= 1.0);
    CHECK(map >= 0.0);
    CHECK(map <= 1.0);
  }

  const std::string csv = slurp(args.out_dir + "/cmc.csv");
  CHECK(csv.rfind("protocol,rank,match_rate\n", 0) == 0);
  CHECK(csv.find("\ncc,1,") != std::string::npos);
  CHECK(csv.find("\nsc,8,") != std::string::npos);  // 8 gallery tracklets

  SUBCASE("a single protocol yields a single deterministic report") {
    EvalArgs one = args;
    one.out_dir = scratch("eval_cc");
    RunConfig cc_cfg = cfg;
    cc_cfg.protocol = "cc";
    cmd_eval(one, cc_cfg, silent);
    const auto single =
        nlohmann::json::parse(slurp(one.out_dir + "/report.json"));
    REQUIRE(single["reports"].size() == 1);
    CHECK(single["reports"][0]["protocol"] == "cc");
    CHECK(single["reports"][0] == doc["reports"][0]);

    EvalArgs again = one;
    again.out_dir = scratch("eval_cc2");
    cmd_eval(again, cc_cfg, silent);
    CHECK(slurp(again.out_dir + "/report.json") ==
          slurp(one.out_dir + "/report.json"));
  }

  SUBCASE("a manifest without a gallery is an eval error") {
    const std::string dir = scratch("eval_nogal");
    std::vector<std::pair<std::string, Split>> manifest;
    const ClipDataset full = load_dataset(
        data + "/keypoints.jsonl", data + "/manifest.jsonl", "");
    for (const auto& t : full.tracklets) {
      manifest.emplace_back(t.tracklet_id, Split::query);
    }
    write_manifest_jsonl(dir + "/manifest.jsonl", manifest);
    EvalArgs bad = args;
    bad.manifest_path = dir + "/manifest.jsonl";
    bad.out_dir = scratch("eval_nogal_out");
    const auto err = capture_error([&] { cmd_eval(bad, all, silent); });
    CHECK(err.code == ErrorCode::eval);
    CHECK(err.message.find("gallery") != std::string::npos);
  }
}

TEST_CASE("the numeric mode of a checkpoint overrides the config") {
  RunConfig cfg = tiny_config();
  cfg.mode = "f32";
  const std::string data = make_dataset(cfg, "mode_data");
  const std::string run = scratch("mode_train");
  std::ostringstream silent;
  cmd_train({data + "/keypoints.jsonl", data + "/manifest.jsonl",
             data + "/appearance.jsonl", run},
            cfg, silent);

  RunConfig eval_cfg = tiny_config();  // defaults to f64
  EvalArgs args{run + "/model.ckpt", data + "/keypoints.jsonl",
                data + "/manifest.jsonl", data + "/appearance.jsonl",
                scratch("mode_eval")};
  std::ostringstream log;
  cmd_eval(args, eval_cfg, log);
  CHECK(log.str().find("overridden") != std::string::npos);
  CHECK(slurp(args.out_dir + "/resolved.cfg").find("mode = f32") !=
        std::string::npos);
}

TEST_CASE("synth output feeds preprocess even at minimum size") {
  RunConfig cfg = tiny_config();
  cfg.synth_identities = 1;
  cfg.synth_tracklets = 1;
  cfg.synth_frames = 8;
  const std::string data = make_dataset(cfg, "synth_min");

  const auto sequences = read_keypoints_jsonl(data + "/keypoints.jsonl");
  REQUIRE(sequences.size() == 1);
  CHECK(sequences[0].frames() == 8);
  CHECK(sequences[0].points.size() == 8 * kRawKeypoints);

  std::ostringstream log;
  cmd_preprocess({data + "/keypoints.jsonl", data + "/manifest.jsonl",
                  data + "/appearance.jsonl", scratch("synth_min_pre")},
                 cfg, log);
  CHECK(log.str().find("1 tracklets") != std::string::npos);
}

#ifdef ASGL_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(ASGL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("the command line maps errors to exit codes") {
  const std::string dir = scratch("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("synth --out " + dir + "/d1 --identities 2 --tracklets 1 "
                "--frames 6") == 0);
  // unknown --set key -> config error
  CHECK(run_cli("synth --out " + dir + "/d2 --set nonsense=1") == 3);
  // malformed --set pair -> config error
  CHECK(run_cli("synth --out " + dir + "/d3 --set nonsense") == 3);
  // missing checkpoint -> file error
  CHECK(run_cli("eval --checkpoint " + dir + "/missing.ckpt --keypoints " +
                dir + "/d1/keypoints.jsonl --manifest " + dir +
                "/d1/manifest.jsonl --out " + dir + "/d4") == 7);
  // missing required flag -> CLI parse failure, nonzero
  CHECK(run_cli("train --manifest x") != 0);
  // unreadable config file -> file error
  CHECK(run_cli("check --config " + dir + "/absent.cfg") == 7);
}
#endif
