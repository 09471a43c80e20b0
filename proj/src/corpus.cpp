#include "mtmrc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mtmrc/metrics.hpp"

namespace mtmrc {

using nlohmann::json;

std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string lemmatize(std::string_view lower) {
  constexpr std::size_t kMinStem = 4;
  for (std::string_view suffix : {"ing", "es", "ed", "s"}) {
    if (lower.size() >= suffix.size() + kMinStem && lower.ends_with(suffix)) {
      return std::string(lower.substr(0, lower.size() - suffix.size()));
    }
  }
  return std::string(lower);
}

Token make_token(std::string_view surface) {
  Token t;
  t.surface = std::string(surface);
  t.lower = fold_case(surface);
  t.lemma = lemmatize(t.lower);
  return t;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80 && std::isspace(c)) {
      ++i;
    } else if (c < 0x80 && std::ispunct(c)) {
      out.push_back(make_token(text.substr(i, 1)));
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size()) {
        const auto d = static_cast<unsigned char>(text[j]);
        if (d < 0x80 && (std::isspace(d) || std::ispunct(d))) break;
        ++j;
      }
      out.push_back(make_token(text.substr(i, j - i)));
      i = j;
    }
  }
  return out;
}

std::vector<std::string> surfaces(const TokenSeq& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.surface);
  return out;
}

std::vector<std::string> lowers(const TokenSeq& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.lower);
  return out;
}

std::size_t Sample::answer_length() const {
  if (is_span()) return span().end - span().begin + 1;
  return 1;
}

void validate(const Sample& s) {
  const auto n = s.passage.size();
  auto fail = [&](const std::string& why) { throw DataError("sample '" + s.id + "': " + why); };
  if (s.passage.empty()) fail("empty passage");
  if (s.question.empty()) fail("empty question");
  if (!(s.weight >= 0.0 && s.weight <= 1.0)) fail("weight outside [0,1]");
  if (s.task_id == kTargetTask && s.weight != 1.0) fail("target sample with weight != 1");
  if (s.is_span()) {
    const auto& a = s.span();
    if (a.begin > a.end) fail("answer begin " + std::to_string(a.begin) + " > end " + std::to_string(a.end));
    if (a.end >= n) fail("answer end " + std::to_string(a.end) + " outside passage of " + std::to_string(n) + " tokens");
  } else {
    const auto& c = s.cloze();
    if (c.candidates.empty()) fail("no candidates");
    if (c.gold >= c.candidates.size()) fail("gold index out of range");
    for (std::size_t k = 0; k < c.candidates.size(); ++k) {
      if (c.candidates[k].empty()) fail("candidate " + std::to_string(k) + " has zero occurrences");
      for (auto pos : c.candidates[k]) {
        if (pos >= n) fail("candidate " + std::to_string(k) + " occurrence " + std::to_string(pos) + " outside passage");
      }
    }
  }
}

DataFormat parse_format(std::string_view name) {
  if (name == "span-json") return DataFormat::SpanJson;
  if (name == "cloze-json") return DataFormat::ClozeJson;
  if (name == "generative-json") return DataFormat::GenerativeJson;
  throw ConfigError("unknown data format '" + std::string(name) + "'");
}

std::string_view format_name(DataFormat f) {
  switch (f) {
    case DataFormat::SpanJson: return "span-json";
    case DataFormat::ClozeJson: return "cloze-json";
    case DataFormat::GenerativeJson: return "generative-json";
  }
  return "?";
}

DatasetStats dataset_stats(const std::vector<Sample>& samples) {
  DatasetStats st;
  st.count = samples.size();
  if (samples.empty()) return st;
  double passage_total = 0.0, answer_total = 0.0;
  std::size_t span_count = 0;
  for (const auto& s : samples) {
    passage_total += static_cast<double>(s.passage.size());
    if (s.is_span()) {
      answer_total += static_cast<double>(s.answer_length());
      ++span_count;
    }
  }
  st.avg_passage_tokens = passage_total / static_cast<double>(samples.size());
  if (span_count > 0) st.avg_answer_tokens = answer_total / static_cast<double>(span_count);
  return st;
}

TaskDataset make_dataset(int task_id, std::string name, std::vector<Sample> samples) {
  TaskDataset ds;
  ds.task_id = task_id;
  ds.name = std::move(name);
  ds.samples = std::move(samples);
  for (auto& s : ds.samples) {
    s.task_id = task_id;
    if (task_id == kTargetTask) s.weight = 1.0;
    for (const auto* seq : {&s.question, &s.passage}) {
      for (const auto& t : *seq) ds.vocab.try_emplace(t.lower, ds.vocab.size());
    }
  }
  ds.stats = dataset_stats(ds.samples);
  return ds;
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("JSON parse error at line " + std::to_string(line) + ": " + e.what(), line);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T field(const json& obj, const char* key, const std::string& id) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError("sample '" + id + "': missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError("sample '" + id + "': field '" + key + "' has the wrong type");
  }
}

std::string sample_id(const json& obj, std::size_t index) {
  auto it = obj.find("id");
  if (it != obj.end() && it->is_string()) return it->get<std::string>();
  return "#" + std::to_string(index);
}

const json& top_list(const json& doc) {
  if (!doc.is_array()) throw DataError("top-level JSON value must be a list of samples");
  return doc;
}

}  // namespace

TaskDataset parse_dataset(std::string_view json_text, DataFormat format, int task_id, std::string name) {
  if (format == DataFormat::GenerativeJson) {
    throw ConfigError("generative-json must be converted to spans first (convert-span)");
  }
  const json doc = parse_json(json_text);
  std::vector<Sample> samples;
  std::size_t index = 0;
  for (const auto& obj : top_list(doc)) {
    const std::string id = sample_id(obj, index++);
    if (!obj.is_object()) throw DataError("sample '" + id + "': not an object");
    Sample s;
    s.id = id;
    s.task_id = task_id;
    s.question = tokenize(field<std::string>(obj, "question", id));
    s.passage = tokenize(field<std::string>(obj, "passage", id));
    if (format == DataFormat::SpanJson) {
      const auto b = field<long long>(obj, "answer_begin", id);
      const auto e = field<long long>(obj, "answer_end", id);
      if (b < 0 || e < 0) throw DataError("sample '" + id + "': negative answer index");
      s.answer = Span{static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
    } else {
      Cloze c;
      for (const auto& cand : field<std::vector<std::vector<long long>>>(obj, "candidates", id)) {
        std::vector<std::size_t> occ;
        for (auto p : cand) {
          if (p < 0) throw DataError("sample '" + id + "': negative candidate index");
          occ.push_back(static_cast<std::size_t>(p));
        }
        c.candidates.push_back(std::move(occ));
      }
      const auto g = field<long long>(obj, "gold", id);
      if (g < 0) throw DataError("sample '" + id + "': negative gold index");
      c.gold = static_cast<std::size_t>(g);
      s.answer = std::move(c);
    }
    validate(s);
    samples.push_back(std::move(s));
  }
  return make_dataset(task_id, std::move(name), std::move(samples));
}

TaskDataset load_dataset(const std::filesystem::path& path, DataFormat format, int task_id) {
  return parse_dataset(read_file(path), format, task_id, path.stem().string());
}

std::vector<GenerativeSample> parse_generative(std::string_view json_text) {
  const json doc = parse_json(json_text);
  std::vector<GenerativeSample> out;
  std::size_t index = 0;
  for (const auto& obj : top_list(doc)) {
    GenerativeSample g;
    g.id = sample_id(obj, index++);
    if (!obj.is_object()) throw DataError("sample '" + g.id + "': not an object");
    g.question = tokenize(field<std::string>(obj, "question", g.id));
    g.passage = tokenize(field<std::string>(obj, "passage", g.id));
    g.answer_text = tokenize(field<std::string>(obj, "answer_text", g.id));
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GenerativeSample> load_generative(const std::filesystem::path& path) {
  return parse_generative(read_file(path));
}

std::optional<SpanMatch> best_rouge_span(const TokenSeq& passage, const TokenSeq& answer) {
  if (passage.empty() || answer.empty()) return std::nullopt;
  const auto p = lowers(passage);
  const auto a = lowers(answer);
  const std::size_t n = p.size(), m = a.size();
  std::optional<SpanMatch> best;
  // Row e of the DP holds LCS(p[b..e], a[0..j)); each begin extends rows incrementally.
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(prev.begin(), prev.end(), 0);
    for (std::size_t e = b; e < n; ++e) {
      cur[0] = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        cur[j] = p[e] == a[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
      }
      std::swap(prev, cur);
      const double score = rouge_from_lcs(prev[m], e - b + 1, m);
      if (!best || score > best->score) best = SpanMatch{Span{b, e}, score};
    }
  }
  return best;
}

std::optional<Sample> convert_generative_to_span(const GenerativeSample& g, double rouge_threshold) {
  const auto match = best_rouge_span(g.passage, g.answer_text);
  if (!match || match->score < rouge_threshold) return std::nullopt;
  Sample s;
  s.id = g.id;
  s.question = g.question;
  s.passage = g.passage;
  s.answer = match->span;
  return s;
}

namespace {

std::string join_surfaces(const TokenSeq& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i].surface;
  }
  return out;
}

}  // namespace

std::string serialize_dataset(const TaskDataset& ds) {
  json list = json::array();
  for (const auto& s : ds.samples) {
    json obj{{"id", s.id}, {"question", join_surfaces(s.question)}, {"passage", join_surfaces(s.passage)}};
    if (s.is_span()) {
      obj["answer_begin"] = s.span().begin;
      obj["answer_end"] = s.span().end;
    } else {
      obj["candidates"] = s.cloze().candidates;
      obj["gold"] = s.cloze().gold;
    }
    list.push_back(std::move(obj));
  }
  return list.dump(1);
}

TaskDataset truncate_passages(const TaskDataset& ds, std::size_t max_tokens) {
  std::vector<Sample> kept;
  kept.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    if (s.passage.size() <= max_tokens) {
      kept.push_back(s);
      continue;
    }
    Sample t = s;
    t.passage.resize(max_tokens);
    if (t.is_span()) {
      if (t.span().end >= max_tokens) continue;
    } else {
      const auto& c = s.cloze();
      Cloze cut;
      bool gold_survives = false;
      for (std::size_t k = 0; k < c.candidates.size(); ++k) {
        std::vector<std::size_t> occ;
        for (auto p : c.candidates[k]) {
          if (p < max_tokens) occ.push_back(p);
        }
        if (occ.empty()) continue;
        if (k == c.gold) {
          cut.gold = cut.candidates.size();
          gold_survives = true;
        }
        cut.candidates.push_back(std::move(occ));
      }
      if (!gold_survives) continue;
      t.answer = std::move(cut);
    }
    kept.push_back(std::move(t));
  }
  return make_dataset(ds.task_id, ds.name, std::move(kept));
}

std::vector<Minibatch> make_minibatches(const TaskDataset& ds, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Minibatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Minibatch mb;
    mb.task_id = ds.task_id;
    const auto stop = std::min(order.size(), start + batch_size);
    mb.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
    batches.push_back(std::move(mb));
  }
  return batches;
}

}  // namespace mtmrc
