#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "q2q/bm25.h"

namespace q2q {

namespace {

constexpr std::array<char, 8> kMagic = {'Q', '2', 'Q', 'B', 'M', '2', '5', '\0'};

static_assert(std::endian::native == std::endian::little, "index I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void pod(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw CapacityError("string too long for index");
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw FormatError("truncated index file");
    return value;
  }

  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw FormatError("truncated index file");
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_index(std::ostream& out, const InvertedIndex& index) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(kIndexFormatVersion);
  w.pod<std::uint64_t>(index.passage_count());
  w.pod<double>(index.avgdl());

  const auto& analyzer = index.analyzer().options();
  w.pod<std::uint8_t>(analyzer.stem ? 1 : 0);
  std::vector<std::string> stopwords(analyzer.stopwords.begin(), analyzer.stopwords.end());
  std::sort(stopwords.begin(), stopwords.end());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(stopwords.size()));
  for (const auto& s : stopwords) w.str(s);

  for (std::size_t d = 0; d < index.passage_count(); ++d) {
    w.str(index.passage_ids()[d]);
    w.pod<std::uint32_t>(index.doc_lengths()[d]);
  }

  w.pod<std::uint64_t>(index.term_count());
  for (std::size_t t = 0; t < index.term_count(); ++t) {
    w.str(index.terms()[t]);
    const auto& list = index.all_postings()[t];
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.pod<std::uint32_t>(p.doc);
      w.pod<std::uint32_t>(p.tf);
    }
  }
  if (!out) throw Error("failed writing index");
}

InvertedIndex load_index(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("not a q2q BM25 index (bad magic)");
  Reader r(in);
  const auto version = r.pod<std::uint32_t>();
  if (version != kIndexFormatVersion) {
    throw FormatError("unsupported index format version " + std::to_string(version) + " (expected " +
                      std::to_string(kIndexFormatVersion) + ")");
  }
  const auto n = r.pod<std::uint64_t>();
  const auto stored_avgdl = r.pod<double>();

  AnalyzerOptions analyzer;
  analyzer.stem = r.pod<std::uint8_t>() != 0;
  const auto stopword_count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < stopword_count; ++i) analyzer.stopwords.insert(r.str());

  std::vector<std::string> ids;
  std::vector<std::uint32_t> lengths;
  for (std::uint64_t d = 0; d < n; ++d) {
    ids.push_back(r.str());
    lengths.push_back(r.pod<std::uint32_t>());
  }

  const auto term_count = r.pod<std::uint64_t>();
  std::vector<std::string> terms;
  std::vector<std::vector<Posting>> lists;
  for (std::uint64_t t = 0; t < term_count; ++t) {
    terms.push_back(r.str());
    const auto count = r.pod<std::uint32_t>();
    std::vector<Posting> list;
    list.reserve(std::min<std::uint32_t>(count, 1u << 20));
    for (std::uint32_t j = 0; j < count; ++j) {
      const auto doc = r.pod<std::uint32_t>();
      const auto tf = r.pod<std::uint32_t>();
      list.push_back(Posting{doc, tf});
    }
    lists.push_back(std::move(list));
  }

  InvertedIndex index(std::move(ids), std::move(lengths), std::move(terms), std::move(lists), std::move(analyzer));
  if (index.avgdl() != stored_avgdl) throw FormatError("stored avgdl does not match document lengths");
  return index;
}

void save_index(const std::string& path, const InvertedIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_index(out, index);
}

InvertedIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open index '" + path + "'");
  return load_index(in);
}

}  // namespace q2q
