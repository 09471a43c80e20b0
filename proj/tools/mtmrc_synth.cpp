#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mtmrc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mtmrc;

namespace {

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

// Writes a synthetic benchmark (datasets plus a ready-to-run config) to --out.
int main(int argc, char** argv) {
  CLI::App app{"mtmrc_synth: generate synthetic reading-comprehension benchmarks"};
  std::string preset = "related", out = "synth";
  std::uint64_t seed = 1;
  std::size_t target = 1000, dev = 300, aux = 5000;
  app.add_option("--preset", preset, "related (target + one mixed related task) or three-task")
      ->check(CLI::IsMember({"related", "three-task"}));
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--target", target, "target training samples")->check(CLI::PositiveNumber);
  app.add_option("--dev", dev, "target dev samples")->check(CLI::PositiveNumber);
  app.add_option("--aux", aux, "samples per auxiliary task")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const Benchmark b = preset == "related" ? related_benchmark(seed, target, dev, aux - aux * 2 / 5, aux * 2 / 5)
                                            : three_task_benchmark(seed, target, dev, aux);
    fs::create_directories(out);
    write(fs::path(out) / "target.json", serialize_dataset(b.target));
    write(fs::path(out) / "dev.json", serialize_dataset(b.dev));
    std::string aux_list;
    for (const auto& a : b.auxiliary) {
      const std::string file = "aux-" + a.name + ".json";
      write(fs::path(out) / file, serialize_dataset(a));
      aux_list += (aux_list.empty() ? "" : ", ") + file;
    }
    const std::string config = "[data]\ntarget = target.json\ndev = dev.json\naux = " + aux_list +
                               "\n\n[model]\nembed_dim = 8\nreduce_dim = 8\nhidden_dim = 8\n\n"
                               "[train]\nepochs = 4\nmode = " +
                               std::string(preset == "related" ? "none" : "ced") +
                               "\n\n[sweep]\nalphas = 0, 0.25, 0.5, 1.0\n\n[run]\nseed = " + std::to_string(seed) +
                               "\n";
    write(fs::path(out) / "config.ini", config);
    std::cout << "wrote " << preset << " benchmark to " << out << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
