#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lthm {

using WordId = std::uint32_t;
using DocIndex = std::uint32_t;

inline constexpr std::int32_t kNoLink = -1;

// 64-bit FNV-1a.
std::uint64_t fnv1a_hash(std::string_view bytes);

// Reserved token that stands in for a link anchor whose word was filtered out
// of the vocabulary. Always retained and always assigned the last id.
inline constexpr const char* kLinkPlaceholder = "<link>";

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(id); }
  std::optional<WordId> find(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }

  // FNV-1a over the words in id order.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

struct Link {
  std::size_t pos;
  DocIndex target;
  bool operator==(const Link&) const = default;
};

struct Document {
  std::string id;
  std::vector<WordId> tokens;
  // Parallel to tokens: target doc index, or kNoLink.
  std::vector<std::int32_t> link_targets;

  std::size_t size() const { return tokens.size(); }
  std::vector<Link> links() const;
  std::size_t link_count() const;

  bool operator==(const Document&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> docs, Vocabulary vocab);

  std::size_t num_docs() const { return docs_.size(); }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t total_tokens() const { return total_tokens_; }
  std::size_t total_links() const { return total_links_; }

  const Document& doc(DocIndex d) const { return docs_.at(d); }
  const std::vector<Document>& docs() const { return docs_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::optional<DocIndex> find_doc(const std::string& id) const;

  // FNV-1a over the canonical serialization.
  std::uint64_t hash() const;

  bool operator==(const Corpus& other) const {
    return docs_ == other.docs_ && vocab_ == other.vocab_;
  }

 private:
  std::vector<Document> docs_;
  Vocabulary vocab_;
  std::unordered_map<std::string, DocIndex> doc_index_;
  std::size_t total_tokens_ = 0;
  std::size_t total_links_ = 0;
};

// A corpus together with the subset of documents whose outgoing links are
// observable. Text is always fully visible. Tokens whose link is hidden are
// seen as ordinary no-link tokens.
class CorpusView {
 public:
  CorpusView(const Corpus& corpus, std::vector<bool> visible_link_sources);

  static CorpusView all_links(const Corpus& corpus);
  static CorpusView text_only(const Corpus& corpus);

  const Corpus& corpus() const { return *corpus_; }
  std::size_t num_docs() const { return corpus_->num_docs(); }
  bool links_visible(DocIndex d) const { return visible_[d]; }

  // Link target of token i in doc d as seen through this view.
  std::int32_t link_target(DocIndex d, std::size_t i) const {
    return visible_[d] ? corpus_->doc(d).link_targets[i] : kNoLink;
  }

  std::size_t visible_link_count() const { return visible_links_; }
  void for_each_link(const std::function<void(DocIndex source, const Link&)>& fn) const;

 private:
  const Corpus* corpus_;
  std::vector<bool> visible_;
  std::size_t visible_links_ = 0;
};

struct RawLink {
  std::size_t pos;
  std::string target;
};

struct RawDocument {
  std::size_t line = 0;
  std::string id;
  std::vector<std::string> tokens;
  std::vector<RawLink> links;
};

struct VocabOptions {
  std::size_t min_count = 1;
  std::set<std::string> stopwords;
};

// Words with frequency >= min_count that are not stopwords, ids by descending
// frequency then lexicographic order.
Vocabulary build_vocabulary(std::span<const RawDocument> docs, std::size_t min_count,
                            const std::set<std::string>& stopwords);

// Reads line-delimited JSON records. Throws DataError carrying the line number.
std::vector<RawDocument> read_raw_documents(std::istream& in);

// Maps raw documents onto a vocabulary. Tokens missing from it are dropped and
// link positions re-indexed; dropped link anchors are moved onto the
// placeholder word, which is appended to the vocabulary if needed.
Corpus index_corpus(const std::vector<RawDocument>& raw, Vocabulary vocab);

Corpus parse_corpus(std::istream& in, const VocabOptions& options = {});
Corpus parse_corpus(std::istream& in, const Vocabulary& fixed_vocab);
Corpus load_corpus(const std::string& path, const VocabOptions& options = {});

void serialize_corpus(const Corpus& corpus, std::ostream& out);

void write_vocabulary(const Vocabulary& vocab, std::ostream& out);
Vocabulary read_vocabulary(std::istream& in);
std::set<std::string> read_stopwords(std::istream& in);

struct Split {
  std::vector<DocIndex> test_docs;
  CorpusView train;
  CorpusView test;
};

Split split_train_test(const Corpus& corpus, double test_fraction, std::uint64_t seed);
Split split_from_test_set(const Corpus& corpus, const std::vector<DocIndex>& test_docs);

void write_split(const Corpus& corpus, const Split& split, std::ostream& out);
Split read_split(const Corpus& corpus, std::istream& in);

std::vector<std::size_t> in_degree(const CorpusView& view);

}  // namespace lthm
