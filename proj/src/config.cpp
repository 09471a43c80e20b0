#include "mtmrc/config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mtmrc {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"data", {"target", "dev", "aux", "format", "aux_format", "max_passage_tokens"}},
      {"lm", {"order", "vocab_size", "add_k", "interpolation", "length_add"}},
      {"model", {"embed_dim", "reduce_dim", "hidden_dim", "layers", "steps", "max_span_len"}},
      {"train",
       {"batch_size", "lr", "dropout", "step_dropout", "epochs", "mode", "alpha", "ema_decay", "clip_norm",
        "vocab_size", "threads"}},
      {"sweep", {"alphas"}},
      {"run", {"seed", "out"}},
  };
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    boost::algorithm::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Flat view of the validated key/value pairs with typed accessors that name
/// the offending key on failure.
class Values {
 public:
  explicit Values(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  const std::string& text(const std::string& key) const { return kv_.at(key); }

  double real(const std::string& key) const {
    const auto& s = text(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
  }

  std::uint64_t count(const std::string& key) const {
    const auto& s = text(key);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(key + ": integer out of range '" + s + "'");
    }
  }

  template <class T>
  void read(const std::string& key, T& dst) const {
    if (!has(key)) return;
    if constexpr (std::is_floating_point_v<T>) {
      dst = real(key);
    } else {
      dst = static_cast<T>(count(key));
    }
  }

 private:
  std::map<std::string, std::string> kv_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DataFormat format_at(const Values& v, const std::string& key) {
  try {
    return parse_format(v.text(key));
  } catch (const ConfigError&) {
    throw ConfigError(key + ": expected span-json or cloze-json, got '" + v.text(key) + "'");
  }
}

void require_range(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError(key + ": must be " + rule);
}

RunConfig build(const std::map<std::string, std::string>& kv, const std::filesystem::path& base) {
  const Values v(kv);
  RunConfig c;

  if (v.has("data.target")) c.data.target = resolve(base, v.text("data.target"));
  if (v.has("data.dev")) c.data.dev = resolve(base, v.text("data.dev"));
  if (v.has("data.aux")) {
    for (const auto& p : split_list(v.text("data.aux"))) c.data.auxiliary.push_back(resolve(base, p));
  }
  if (v.has("data.format")) c.data.format = format_at(v, "data.format");
  c.data.aux_format = c.data.format;
  if (v.has("data.aux_format")) c.data.aux_format = format_at(v, "data.aux_format");
  for (auto [key, f] : {std::pair{"data.format", c.data.format}, std::pair{"data.aux_format", c.data.aux_format}}) {
    require_range(f != DataFormat::GenerativeJson, key, "span-json or cloze-json (convert generative data first)");
  }
  v.read("data.max_passage_tokens", c.data.max_passage_tokens);
  require_range(c.data.max_passage_tokens >= 1, "data.max_passage_tokens", ">= 1");

  if (v.has("lm.order")) c.lm.order = static_cast<int>(v.count("lm.order"));
  v.read("lm.vocab_size", c.lm.vocab_size);
  v.read("lm.add_k", c.lm.add_k);
  v.read("lm.interpolation", c.lm.interpolation);
  v.read("lm.length_add", c.length_add);
  require_range(c.lm.order >= 1 && c.lm.order <= 8, "lm.order", "in [1,8]");
  require_range(c.lm.vocab_size >= 1, "lm.vocab_size", ">= 1");
  require_range(c.lm.add_k >= 0.0, "lm.add_k", ">= 0");
  require_range(c.lm.interpolation >= 0.0 && c.lm.interpolation <= 1.0, "lm.interpolation", "in [0,1]");
  require_range(c.length_add >= 0.0, "lm.length_add", ">= 0");

  auto& m = c.train.model;
  v.read("model.embed_dim", m.embed_dim);
  v.read("model.reduce_dim", m.reduce_dim);
  v.read("model.hidden_dim", m.hidden_dim);
  v.read("model.layers", m.layers);
  v.read("model.steps", m.steps);
  v.read("model.max_span_len", m.max_span_len);
  for (auto [key, val] : {std::pair{"model.embed_dim", m.embed_dim}, std::pair{"model.reduce_dim", m.reduce_dim},
                          std::pair{"model.hidden_dim", m.hidden_dim}, std::pair{"model.layers", m.layers},
                          std::pair{"model.steps", m.steps}, std::pair{"model.max_span_len", m.max_span_len}}) {
    require_range(val >= 1, key, ">= 1");
  }

  auto& t = c.train;
  v.read("train.batch_size", t.batch_size);
  v.read("train.lr", t.lr);
  v.read("train.dropout", t.dropout);
  v.read("train.step_dropout", t.step_dropout);
  v.read("train.epochs", t.epochs);
  v.read("train.ema_decay", t.ema_decay);
  v.read("train.clip_norm", t.clip_norm);
  v.read("train.vocab_size", t.vocab_size);
  v.read("train.threads", t.threads);
  if (v.has("train.mode")) t.mode = parse_mode(v.text("train.mode"));
  if (v.has("train.alpha")) t.alpha = v.real("train.alpha");
  require_range(t.clip_norm >= 0.0, "train.clip_norm", ">= 0");
  t.validate();

  if (v.has("sweep.alphas")) {
    c.sweep.alphas.clear();
    for (const auto& a : split_list(v.text("sweep.alphas"))) {
      Values one({{"sweep.alphas", a}});
      const double x = one.real("sweep.alphas");
      require_range(x >= 0.0, "sweep.alphas", "a list of values >= 0");
      c.sweep.alphas.push_back(x);
    }
    require_range(!c.sweep.alphas.empty(), "sweep.alphas", "a non-empty list");
  }

  v.read("run.seed", c.seed);
  if (v.has("run.out")) c.out = v.text("run.out");
  t.seed = c.seed;
  return c;
}

void apply(std::map<std::string, std::string>& kv, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
  const auto it = schema().find(section);
  if (it == schema().end()) throw ConfigError(key + ": unknown section '" + section + "'");
  if (!it->second.count(name)) throw ConfigError(key + ": unknown key");
  kv[key] = value;
}

}  // namespace

json RunConfig::to_json() const {
  json aux = json::array();
  for (const auto& p : data.auxiliary) aux.push_back(p.string());
  json j;
  j["data"] = {{"target", data.target.string()},
               {"dev", data.dev.string()},
               {"aux", aux},
               {"format", format_name(data.format)},
               {"aux_format", format_name(data.aux_format)},
               {"max_passage_tokens", data.max_passage_tokens}};
  j["lm"] = {{"order", lm.order},
             {"vocab_size", lm.vocab_size},
             {"add_k", lm.add_k},
             {"interpolation", lm.interpolation},
             {"length_add", length_add}};
  j["train"] = train;
  j["sweep"] = {{"alphas", sweep.alphas}};
  j["run"] = {{"seed", seed}, {"out", out.string()}};
  return j;
}

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' must look like section.key=value");
  std::string key = text.substr(0, eq), value = text.substr(eq + 1);
  boost::algorithm::trim(key);
  boost::algorithm::trim(value);
  return {key, value};
}

RunConfig parse_config(const std::string& ini_text, const std::filesystem::path& base,
                       const std::vector<Override>& overrides) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message(), e.line());
  }
  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section + ": keys must live inside a [section]");
    for (const auto& [name, leaf] : body) apply(kv, section + "." + name, leaf.data());
  }
  for (const auto& o : overrides) apply(kv, o.key, o.value);
  return build(kv, base);
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path(), overrides);
}

RunConfig default_config(const std::vector<Override>& overrides) { return parse_config("", {}, overrides); }

}  // namespace mtmrc
