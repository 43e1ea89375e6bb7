#include "lthm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lthm/error.hpp"

namespace lthm {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::uint64_t fnv1a_hash(std::string_view bytes) { return fnv1a(bytes); }

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second)
      throw DataError("duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<WordId> Vocabulary::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& w : words_) {
    h = fnv1a(w, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  return h;
}

std::vector<Link> Document::links() const {
  std::vector<Link> out;
  for (std::size_t i = 0; i < link_targets.size(); ++i)
    if (link_targets[i] != kNoLink) out.push_back({i, static_cast<DocIndex>(link_targets[i])});
  return out;
}

std::size_t Document::link_count() const {
  return static_cast<std::size_t>(
      std::count_if(link_targets.begin(), link_targets.end(), [](auto t) { return t != kNoLink; }));
}

Corpus::Corpus(std::vector<Document> docs, Vocabulary vocab)
    : docs_(std::move(docs)), vocab_(std::move(vocab)) {
  if (docs_.empty()) throw DataError("corpus has no documents");
  if (vocab_.size() == 0) throw DataError("corpus has an empty vocabulary");
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    const auto& doc = docs_[d];
    if (!doc_index_.emplace(doc.id, static_cast<DocIndex>(d)).second)
      throw DataError("duplicate document id '" + doc.id + "'");
    if (doc.link_targets.size() != doc.tokens.size())
      throw DataError("document '" + doc.id + "': link table does not match token count");
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (doc.tokens[i] >= vocab_.size())
        throw DataError("document '" + doc.id + "': word id out of range");
      auto t = doc.link_targets[i];
      if (t != kNoLink) {
        if (t < 0 || static_cast<std::size_t>(t) >= docs_.size())
          throw DataError("document '" + doc.id + "': link target out of range");
        ++total_links_;
      }
    }
    total_tokens_ += doc.tokens.size();
  }
}

std::optional<DocIndex> Corpus::find_doc(const std::string& id) const {
  auto it = doc_index_.find(id);
  if (it == doc_index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Corpus::hash() const {
  std::ostringstream out;
  serialize_corpus(*this, out);
  return fnv1a(out.str());
}

CorpusView::CorpusView(const Corpus& corpus, std::vector<bool> visible_link_sources)
    : corpus_(&corpus), visible_(std::move(visible_link_sources)) {
  if (visible_.size() != corpus.num_docs())
    throw DataError("view mask size does not match corpus");
  for (std::size_t d = 0; d < visible_.size(); ++d)
    if (visible_[d]) visible_links_ += corpus.doc(static_cast<DocIndex>(d)).link_count();
}

CorpusView CorpusView::all_links(const Corpus& corpus) {
  return CorpusView(corpus, std::vector<bool>(corpus.num_docs(), true));
}

CorpusView CorpusView::text_only(const Corpus& corpus) {
  return CorpusView(corpus, std::vector<bool>(corpus.num_docs(), false));
}

void CorpusView::for_each_link(
    const std::function<void(DocIndex source, const Link&)>& fn) const {
  for (std::size_t d = 0; d < visible_.size(); ++d) {
    if (!visible_[d]) continue;
    for (const auto& link : corpus_->doc(static_cast<DocIndex>(d)).links())
      fn(static_cast<DocIndex>(d), link);
  }
}

Vocabulary build_vocabulary(std::span<const RawDocument> docs, std::size_t min_count,
                            const std::set<std::string>& stopwords) {
  if (min_count < 1) throw UsageError("min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  bool saw_placeholder = false;
  for (const auto& doc : docs) {
    for (const auto& tok : doc.tokens) {
      if (tok == kLinkPlaceholder) {
        saw_placeholder = true;
        continue;
      }
      ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [word, count] : freq)
    if (count >= min_count && !stopwords.contains(word)) kept.emplace_back(word, count);
  // freq is a std::map so kept is already lexicographic; stable sort keeps it
  // as the tie-break.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size() + 1);
  for (auto& [word, count] : kept) words.push_back(word);
  if (saw_placeholder) words.emplace_back(kLinkPlaceholder);
  if (words.empty()) throw DataError("vocabulary is empty after filtering");
  return Vocabulary(std::move(words));
}

std::vector<RawDocument> read_raw_documents(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_at(lineno, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) fail_at(lineno, "record is not an object");
    RawDocument doc;
    doc.line = lineno;
    if (!rec.contains("id") || !rec["id"].is_string()) fail_at(lineno, "missing string field 'id'");
    doc.id = rec["id"].get<std::string>();
    if (!rec.contains("tokens") || !rec["tokens"].is_array())
      fail_at(lineno, "missing array field 'tokens'");
    for (const auto& t : rec["tokens"]) {
      if (!t.is_string()) fail_at(lineno, "token is not a string");
      doc.tokens.push_back(t.get<std::string>());
    }
    if (rec.contains("links")) {
      if (!rec["links"].is_array()) fail_at(lineno, "'links' is not an array");
      std::set<std::size_t> seen;
      for (const auto& l : rec["links"]) {
        if (!l.is_object() || !l.contains("pos") || !l.contains("target"))
          fail_at(lineno, "link record needs 'pos' and 'target'");
        const auto& pos = l["pos"];
        if (pos.is_array() || (l.contains("length") && l["length"] != 1))
          fail_at(lineno, "multi-word link anchors are not supported");
        if (!pos.is_number_integer()) fail_at(lineno, "link 'pos' is not an integer");
        if (!l["target"].is_string()) fail_at(lineno, "link 'target' is not a string");
        auto p = pos.get<std::int64_t>();
        if (p < 0 || static_cast<std::size_t>(p) >= doc.tokens.size())
          fail_at(lineno, "link position out of range");
        if (!seen.insert(static_cast<std::size_t>(p)).second)
          fail_at(lineno, "more than one link on token " + std::to_string(p));
        doc.links.push_back({static_cast<std::size_t>(p), l["target"].get<std::string>()});
      }
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw DataError("corpus has no documents");

  std::unordered_map<std::string, std::size_t> ids;
  for (const auto& doc : docs)
    if (!ids.emplace(doc.id, doc.line).second)
      fail_at(doc.line, "duplicate document id '" + doc.id + "'");
  for (const auto& doc : docs)
    for (const auto& l : doc.links)
      if (!ids.contains(l.target)) fail_at(doc.line, "link target '" + l.target + "' not in corpus");
  return docs;
}

Corpus index_corpus(const std::vector<RawDocument>& raw, Vocabulary vocab) {
  std::unordered_map<std::string, DocIndex> ids;
  for (std::size_t d = 0; d < raw.size(); ++d) ids.emplace(raw[d].id, static_cast<DocIndex>(d));

  std::optional<WordId> placeholder = vocab.find(kLinkPlaceholder);
  auto placeholder_id = [&]() {
    if (!placeholder) {
      auto words = vocab.words();
      words.emplace_back(kLinkPlaceholder);
      vocab = Vocabulary(std::move(words));
      placeholder = vocab.find(kLinkPlaceholder);
    }
    return *placeholder;
  };

  std::vector<Document> docs;
  docs.reserve(raw.size());
  for (const auto& r : raw) {
    std::vector<std::int32_t> raw_links(r.tokens.size(), kNoLink);
    for (const auto& l : r.links) raw_links[l.pos] = static_cast<std::int32_t>(ids.at(l.target));
    Document doc;
    doc.id = r.id;
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      auto id = vocab.find(r.tokens[i]);
      if (!id) {
        if (raw_links[i] == kNoLink) continue;
        id = placeholder_id();
      }
      doc.tokens.push_back(*id);
      doc.link_targets.push_back(raw_links[i]);
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), std::move(vocab));
}

Corpus parse_corpus(std::istream& in, const VocabOptions& options) {
  auto raw = read_raw_documents(in);
  auto vocab = build_vocabulary(raw, options.min_count, options.stopwords);
  return index_corpus(raw, std::move(vocab));
}

Corpus parse_corpus(std::istream& in, const Vocabulary& fixed_vocab) {
  return index_corpus(read_raw_documents(in), fixed_vocab);
}

Corpus load_corpus(const std::string& path, const VocabOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, options);
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.docs()) {
    nlohmann::json rec;
    rec["id"] = doc.id;
    auto tokens = nlohmann::json::array();
    for (auto w : doc.tokens) tokens.push_back(corpus.vocab().word(w));
    rec["tokens"] = std::move(tokens);
    auto links = nlohmann::json::array();
    for (const auto& l : doc.links())
      links.push_back({{"pos", l.pos}, {"target", corpus.doc(l.target).id}});
    rec["links"] = std::move(links);
    out << rec.dump() << '\n';
  }
}

void write_vocabulary(const Vocabulary& vocab, std::ostream& out) {
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out << vocab.word(static_cast<WordId>(i)) << '\t' << i << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) fail_at(lineno, "expected word<TAB>id");
    try {
      entries.emplace_back(std::stoul(line.substr(tab + 1)), line.substr(0, tab));
    } catch (const std::exception&) {
      fail_at(lineno, "bad vocabulary id");
    }
  }
  std::sort(entries.begin(), entries.end());
  std::vector<std::string> words;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != i) throw DataError("vocabulary ids are not dense");
    words.push_back(std::move(entries[i].second));
  }
  if (words.empty()) throw DataError("vocabulary file is empty");
  return Vocabulary(std::move(words));
}

std::set<std::string> read_stopwords(std::istream& in) {
  std::set<std::string> out;
  std::string w;
  while (in >> w) out.insert(w);
  return out;
}

Split split_from_test_set(const Corpus& corpus, const std::vector<DocIndex>& test_docs) {
  std::vector<bool> is_test(corpus.num_docs(), false);
  for (auto d : test_docs) {
    if (d >= corpus.num_docs()) throw DataError("test document index out of range");
    is_test[d] = true;
  }
  std::vector<bool> is_train(corpus.num_docs());
  for (std::size_t d = 0; d < is_test.size(); ++d) is_train[d] = !is_test[d];
  std::vector<DocIndex> sorted;
  for (std::size_t d = 0; d < is_test.size(); ++d)
    if (is_test[d]) sorted.push_back(static_cast<DocIndex>(d));
  // An empty test set is allowed: everything is training data.
  if (sorted.size() == corpus.num_docs()) throw DataError("split leaves an empty train set");
  return Split{std::move(sorted), CorpusView(corpus, std::move(is_train)),
               CorpusView(corpus, std::move(is_test))};
}

Split split_train_test(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must lie in (0, 1)");
  const std::size_t D = corpus.num_docs();
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(D)));
  if (n_test == 0 || n_test >= D) throw DataError("split leaves an empty train or test set");
  std::vector<DocIndex> order(D);
  std::iota(order.begin(), order.end(), DocIndex{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n_test);
  return split_from_test_set(corpus, order);
}

void write_split(const Corpus& corpus, const Split& split, std::ostream& out) {
  for (std::size_t d = 0; d < corpus.num_docs(); ++d)
    out << corpus.doc(static_cast<DocIndex>(d)).id << '\t'
        << (split.train.links_visible(static_cast<DocIndex>(d)) ? "train" : "test") << '\n';
}

Split read_split(const Corpus& corpus, std::istream& in) {
  std::vector<DocIndex> test;
  std::vector<bool> seen(corpus.num_docs(), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) fail_at(lineno, "expected doc_id<TAB>{train|test}");
    auto id = line.substr(0, tab);
    auto tag = line.substr(tab + 1);
    auto d = corpus.find_doc(id);
    if (!d) fail_at(lineno, "unknown document '" + id + "'");
    if (tag == "test") {
      test.push_back(*d);
    } else if (tag != "train") {
      fail_at(lineno, "split tag must be 'train' or 'test'");
    }
    seen[*d] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw DataError("split file does not cover every document");
  return split_from_test_set(corpus, test);
}

std::vector<std::size_t> in_degree(const CorpusView& view) {
  std::vector<std::size_t> counts(view.num_docs(), 0);
  view.for_each_link([&](DocIndex, const Link& l) { ++counts[l.target]; });
  return counts;
}

}  // namespace lthm
