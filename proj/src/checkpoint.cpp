#include <cmath>
#include <cstring>
#include <fstream>

#include "mtmrc/model.hpp"

namespace mtmrc {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'M', 'T', 'M', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated checkpoint '" + path.string() + "'");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
  const json header{{"config", ckpt.params.config()},
                    {"vocab", ckpt.vocab.words()},
                    {"scalars", ckpt.params.scalar_count()},
                    {"meta", ckpt.meta}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.tensor_count()));
  for (std::size_t i = 0; i < ckpt.params.tensor_count(); ++i) {
    const std::string& name = ckpt.params.name(i);
    const Matrix& t = ckpt.params.tensor(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, t.rows);
    put<std::uint64_t>(out, t.cols);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw DataError("truncated checkpoint header");
  const json header = json::parse(text);

  Checkpoint ckpt;
  ckpt.vocab = ModelVocab(header.at("vocab").get<std::vector<std::string>>());
  ckpt.meta = header.value("meta", json::object());
  ckpt.params = ModelParameters(header.at("config").get<ModelConfig>(), ckpt.vocab.size());

  const auto count = get<std::uint32_t>(in, path);
  if (count != ckpt.params.tensor_count()) throw DataError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("truncated checkpoint tensor name");
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (name != ckpt.params.name(i)) throw DataError("checkpoint tensor '" + name + "' out of layout order");
    Matrix& t = ckpt.params.tensor(i);
    if (rows != t.rows || cols != t.cols) throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
      throw DataError("truncated checkpoint tensor '" + name + "'");
    }
    for (double v : t.data) {
      if (!std::isfinite(v)) throw NumericError("checkpoint tensor '" + name + "' holds non-finite values");
    }
  }
  if (header.at("scalars").get<std::size_t>() != ckpt.params.scalar_count()) {
    throw DataError("checkpoint scalar count does not match its config");
  }
  return ckpt;
}

}  // namespace mtmrc
