#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mtmrc/config.hpp"
#include "mtmrc/manifest.hpp"

using namespace mtmrc;

namespace {

std::string error_of(const std::string& ini, const std::vector<Override>& o = {}) {
  try {
    parse_config(ini, {}, o);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults and a full file") {
    const auto d = default_config();
    CHECK(d.seed == 1);
    CHECK(d.train.mode == WeightingMode::None);
    CHECK(d.sweep.alphas.size() == 11);

    const auto c = parse_config(
        "[data]\ntarget = t.json\ndev = /abs/d.json\naux = a.json, b.json\nformat = cloze-json\n"
        "[lm]\norder = 2\nadd_k = 0.5\n[model]\nembed_dim = 6\nsteps = 3\n"
        "[train]\nmode = mixture\nalpha = 0.25\nepochs = 7\n[sweep]\nalphas = 0, 1\n[run]\nseed = 42\nout = o\n",
        "/base");
    CHECK(c.data.target == std::filesystem::path("/base/t.json"));
    CHECK(c.data.dev == std::filesystem::path("/abs/d.json"));
    REQUIRE(c.data.auxiliary.size() == 2);
    CHECK(c.data.auxiliary[1] == std::filesystem::path("/base/b.json"));
    CHECK(c.data.format == DataFormat::ClozeJson);
    CHECK(c.data.aux_format == DataFormat::ClozeJson);
    CHECK(c.lm.order == 2);
    CHECK(c.lm.add_k == 0.5);
    CHECK(c.train.model.embed_dim == 6);
    CHECK(c.train.model.steps == 3);
    CHECK(c.train.mode == WeightingMode::Mixture);
    CHECK(*c.train.alpha == 0.25);
    CHECK(c.train.epochs == 7);
    CHECK(c.sweep.alphas == std::vector<double>{0.0, 1.0});
    CHECK(c.seed == 42);
    CHECK(c.train.seed == 42);
    CHECK(c.out == std::filesystem::path("o"));
    CHECK(c.to_json()["train"]["epochs"] == 7);
  }

  TEST_CASE("overrides win over file keys, later overrides over earlier") {
    const auto c = parse_config("[train]\nepochs = 3\n", {},
                                {parse_override("train.epochs = 9"), parse_override("run.seed=5"),
                                 parse_override("run.seed=6")});
    CHECK(c.train.epochs == 9);
    CHECK(c.seed == 6);
    CHECK_THROWS_AS(parse_override("novalue"), ConfigError);
    CHECK_THROWS_AS(parse_override("=1"), ConfigError);
  }

  TEST_CASE("errors name the offending key") {
    CHECK(error_of("[train]\nlr = abc\n") == "train.lr: expected a number, got 'abc'");
    CHECK(error_of("[train]\nepochs = -1\n").find("train.epochs") == 0);
    CHECK(error_of("[trian]\nlr = 1\n").find("unknown section") != std::string::npos);
    CHECK(error_of("[train]\nlearning_rate = 1\n") == "train.learning_rate: unknown key");
    CHECK(error_of("[lm]\ninterpolation = 1.5\n").find("lm.interpolation") == 0);
    CHECK(error_of("[data]\nformat = xml\n").find("data.format") == 0);
    CHECK(error_of("[data]\nformat = generative-json\n").find("data.format") == 0);
    CHECK(error_of("[model]\nlayers = 0\n").find("model.layers") == 0);
    CHECK(error_of("[sweep]\nalphas = 0, x\n").find("sweep.alphas") == 0);
    CHECK(error_of("[train]\nmode = mixture\n").find("alpha") != std::string::npos);
    CHECK(error_of("seed = 3\n").find("section") != std::string::npos);
    CHECK(error_of("", {{"bogus.key", "1"}}).find("unknown section") != std::string::npos);
    CHECK_THROWS_AS(parse_config("[train\n", {}), ParseError);
    CHECK_THROWS_AS(load_config("/definitely/missing.ini"), InputError);
  }

  TEST_CASE("load_config anchors relative paths at the file's directory") {
    const auto dir = std::filesystem::temp_directory_path() / "mtmrc-config-test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "run.ini") << "[data]\ntarget = sub/t.json\n";
    CHECK(load_config(dir / "run.ini").data.target == dir / "sub/t.json");
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("manifest JSON carries the documented fields and file digests") {
    const auto dir = std::filesystem::temp_directory_path() / "mtmrc-manifest-test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "in.txt") << "abc";
    RunManifest m("weights", 9);
    m.set_config({{"k", 1}});
    m.add_input(dir / "in.txt");
    m.add_output(dir / "out.tsv");
    m.set_status(2);
    const auto path = m.write(dir);
    CHECK(path.filename() == "manifest-weights.json");
    const auto j = m.to_json();
    CHECK(j["command"] == "weights");
    CHECK(j["seed"] == 9);
    CHECK(j["exit_code"] == 2);
    CHECK(j["inputs"][0]["sha256"] == sha256_hex("abc"));
    CHECK(j["outputs"][0] == (dir / "out.tsv").string());
    CHECK(j["wall_seconds"].get<double>() >= 0.0);
    CHECK_THROWS_AS(m.add_input(dir / "missing"), InputError);
    std::filesystem::remove_all(dir);
  }
}
