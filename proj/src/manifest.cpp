#include "mtmrc/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "mtmrc/common.hpp"

namespace mtmrc {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 15]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "' for hashing");
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

RunManifest::RunManifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.emplace_back(path.string(), sha256_file(path)); }

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, d] : inputs_) inputs.push_back({{"path", p}, {"sha256", d}});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return {{"command", command_}, {"seed", seed_},         {"config", config_},      {"inputs", inputs},
          {"outputs", outputs_}, {"wall_seconds", secs}, {"exit_code", exit_code_}};
}

std::filesystem::path RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto path = dir / ("manifest-" + command_ + ".json");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
  return path;
}

}  // namespace mtmrc
