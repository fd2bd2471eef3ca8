#include "natlab/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace natlab::data {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

double parse_double(const std::string& s, int line_no) {
  try {
    size_t pos = 0;
    double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw CorpusError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

void check_dist(const std::vector<double>& p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (x < 0.0) throw CorpusError(what + ": negative probability");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw CorpusError(what + ": probabilities sum to " + std::to_string(total));
}

}  // namespace

TokenSeq text_to_seq(const std::string& text) {
  TokenSeq seq;
  for (const std::string& s : split_ws(text)) seq.push_back(symbol_token(s));
  return seq;
}

int GeneratorSpec::vocab_size() const {
  if (kind == Kind::MarkovCorruption) return kFirstToken + num_tokens;
  int max_id = kFirstToken - 1;
  for (const auto& [src, modes] : sources) {
    for (int id : src) max_id = std::max(max_id, id);
    for (const Mode& m : modes)
      for (int id : m.seq) max_id = std::max(max_id, id);
  }
  return max_id + 1;
}

void GeneratorSpec::validate() const {
  if (kind == Kind::TwoMode) {
    if (sources.empty()) throw CorpusError("two_mode spec has no sources");
    for (const auto& [src, modes] : sources) {
      std::vector<double> probs;
      for (const Mode& m : modes) probs.push_back(m.prob);
      check_dist(probs, "two_mode source '" + seq_to_text(src) + "'");
    }
  } else {
    if (num_tokens <= 0) throw CorpusError("markov_corruption: empty chain");
    if (replace_rate < 0.0 || replace_rate > 1.0 || drop_rate < 0.0 || drop_rate > 1.0)
      throw CorpusError("markov_corruption: rates must be in [0,1]");
    if (len_min < 1 || len_max < len_min)
      throw CorpusError("markov_corruption: bad length range");
    if (static_cast<int>(init_dist.size()) != num_tokens ||
        static_cast<int>(trans.size()) != num_tokens)
      throw CorpusError("markov_corruption: chain table size mismatch");
    check_dist(init_dist, "markov init");
    for (const auto& row : trans) {
      if (static_cast<int>(row.size()) != num_tokens)
        throw CorpusError("markov_corruption: transition row size mismatch");
      check_dist(row, "markov transition row");
    }
  }
}

bool ParallelCorpus::operator==(const ParallelCorpus& o) const {
  if (pairs != o.pairs || refs != o.refs || seed != o.seed) return false;
  const GeneratorSpec& a = spec;
  const GeneratorSpec& b = o.spec;
  if (a.kind != b.kind) return false;
  if (a.kind == GeneratorSpec::Kind::TwoMode) {
    if (a.sources.size() != b.sources.size()) return false;
    for (size_t i = 0; i < a.sources.size(); ++i) {
      if (a.sources[i].first != b.sources[i].first) return false;
      if (a.sources[i].second.size() != b.sources[i].second.size()) return false;
      for (size_t j = 0; j < a.sources[i].second.size(); ++j)
        if (a.sources[i].second[j].seq != b.sources[i].second[j].seq ||
            a.sources[i].second[j].prob != b.sources[i].second[j].prob)
          return false;
    }
    return true;
  }
  return a.num_tokens == b.num_tokens && a.init_dist == b.init_dist &&
         a.trans == b.trans && a.replace_rate == b.replace_rate &&
         a.drop_rate == b.drop_rate && a.len_min == b.len_min && a.len_max == b.len_max;
}

std::pair<ParallelCorpus, EnumerableCond> gen_two_mode(const GeneratorSpec& spec,
                                                       int n_pairs, uint64_t seed) {
  if (spec.kind != GeneratorSpec::Kind::TwoMode)
    throw CorpusError("gen_two_mode: spec kind is not two_mode");
  spec.validate();
  util::Rng rng(seed);
  ParallelCorpus corpus;
  corpus.spec = spec;
  corpus.seed = seed;
  EnumerableCond cond;
  for (const auto& [src, modes] : spec.sources) {
    auto& dist = cond.by_source[src];
    for (const GeneratorSpec::Mode& m : modes) dist.emplace_back(m.seq, m.prob);
  }
  for (int i = 0; i < n_pairs; ++i) {
    int s = rng.uniform_int(0, static_cast<int>(spec.sources.size()) - 1);
    const auto& [src, modes] = spec.sources[s];
    std::vector<double> probs;
    for (const GeneratorSpec::Mode& m : modes) probs.push_back(m.prob);
    corpus.pairs.emplace_back(src, modes[rng.categorical(probs)].seq);
  }
  return {std::move(corpus), std::move(cond)};
}

namespace {

TokenSeq sample_chain(const GeneratorSpec& spec, util::Rng& rng) {
  int len = rng.uniform_int(spec.len_min, spec.len_max);
  TokenSeq y;
  int state = rng.categorical(spec.init_dist);
  y.push_back(kFirstToken + state);
  for (int i = 1; i < len; ++i) {
    state = rng.categorical(spec.trans[state]);
    y.push_back(kFirstToken + state);
  }
  return y;
}

}  // namespace

ParallelCorpus gen_synthetic(const GeneratorSpec& spec, int n_pairs, uint64_t seed) {
  if (spec.kind != GeneratorSpec::Kind::MarkovCorruption)
    throw CorpusError("gen_synthetic: spec kind is not markov_corruption");
  spec.validate();
  util::Rng rng(seed);
  ParallelCorpus corpus;
  corpus.spec = spec;
  corpus.seed = seed;
  for (int i = 0; i < n_pairs; ++i) {
    TokenSeq y = sample_chain(spec, rng);
    TokenSeq x;
    for (int tok : y) {
      int out = tok;
      if (rng.bernoulli(spec.replace_rate))
        out = kFirstToken + rng.uniform_int(0, spec.num_tokens - 1);
      if (!rng.bernoulli(spec.drop_rate)) x.push_back(out);
    }
    if (x.empty()) x.push_back(y[rng.uniform_int(0, static_cast<int>(y.size()) - 1)]);
    corpus.pairs.emplace_back(std::move(x), std::move(y));
  }
  return corpus;
}

std::vector<TokenSeq> sample_references(const GeneratorSpec& spec, const TokenSeq& X,
                                        int k, uint64_t seed, const TokenSeq* fallback) {
  spec.validate();
  util::Rng rng(seed);
  std::vector<TokenSeq> refs;
  if (spec.kind == GeneratorSpec::Kind::TwoMode) {
    const std::vector<GeneratorSpec::Mode>* modes = nullptr;
    for (const auto& [src, m] : spec.sources)
      if (src == X) modes = &m;
    if (!modes) throw CorpusError("sample_references: unknown source '" + seq_to_text(X) + "'");
    std::vector<double> probs;
    for (const GeneratorSpec::Mode& m : *modes) probs.push_back(m.prob);
    for (int i = 0; i < k; ++i) refs.push_back((*modes)[rng.categorical(probs)].seq);
    return refs;
  }
  // Rejection sampling against the replacement likelihood. Dropped-token
  // sources rarely match in length, hence the capped attempts and fallback.
  double rho = spec.replace_rate;
  double accept_ceiling = 1.0 - rho + rho / spec.num_tokens;
  for (int i = 0; i < k; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
      TokenSeq y = sample_chain(spec, rng);
      if (y.size() != X.size()) continue;
      double log_ratio = 0.0;
      for (size_t j = 0; j < y.size(); ++j) {
        double like = (X[j] == y[j] ? 1.0 - rho : 0.0) + rho / spec.num_tokens;
        log_ratio += std::log(like / accept_ceiling);
      }
      if (std::log(std::max(rng.uniform(), 1e-300)) < log_ratio) {
        refs.push_back(std::move(y));
        accepted = true;
      }
    }
    if (!accepted) refs.push_back(fallback ? *fallback : X);
  }
  return refs;
}

void attach_references(ParallelCorpus& corpus, int k, uint64_t seed) {
  util::Rng rng(seed);
  std::map<TokenSeq, const TokenSeq*> first_target;
  for (const auto& [x, y] : corpus.pairs)
    if (!first_target.count(x)) first_target[x] = &y;
  for (const auto& [x, y] : first_target) {
    util::Rng child = rng.fork();
    corpus.refs[x] = sample_references(corpus.spec, x, k,
                                       child.next_u64(), y);
  }
}

void save_corpus(const ParallelCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open '" + path + "' for writing");
  const GeneratorSpec& spec = corpus.spec;
  out << "#! seed " << corpus.seed << "\n";
  if (spec.kind == GeneratorSpec::Kind::TwoMode) {
    out << "#! kind two_mode\n";
    out << "#! n_sources " << spec.sources.size() << "\n";
    for (size_t s = 0; s < spec.sources.size(); ++s) {
      out << "#! source " << s << " " << seq_to_text(spec.sources[s].first) << "\n";
      for (const GeneratorSpec::Mode& m : spec.sources[s].second)
        out << "#! mode " << s << " " << hex_double(m.prob) << " "
            << seq_to_text(m.seq) << "\n";
    }
  } else {
    out << "#! kind markov_corruption\n";
    out << "#! num_tokens " << spec.num_tokens << "\n";
    out << "#! replace_rate " << hex_double(spec.replace_rate) << "\n";
    out << "#! drop_rate " << hex_double(spec.drop_rate) << "\n";
    out << "#! len_min " << spec.len_min << "\n";
    out << "#! len_max " << spec.len_max << "\n";
    out << "#! init";
    for (double p : spec.init_dist) out << " " << hex_double(p);
    out << "\n";
    for (int r = 0; r < spec.num_tokens; ++r) {
      out << "#! trans " << r;
      for (double p : spec.trans[r]) out << " " << hex_double(p);
      out << "\n";
    }
  }
  for (const auto& [x, y] : corpus.pairs)
    out << seq_to_text(x) << "\t" << seq_to_text(y) << "\n";
  if (!out) throw CorpusError("write failure on '" + path + "'");

  if (!corpus.refs.empty()) {
    std::ofstream rout(path + ".refs");
    if (!rout) throw CorpusError("cannot open '" + path + ".refs' for writing");
    std::map<TokenSeq, size_t> first_line;
    for (size_t i = 0; i < corpus.pairs.size(); ++i)
      if (!first_line.count(corpus.pairs[i].first)) first_line[corpus.pairs[i].first] = i;
    for (const auto& [src, ref_list] : corpus.refs) {
      auto it = first_line.find(src);
      if (it == first_line.end())
        throw CorpusError("refs for source '" + seq_to_text(src) +
                          "' without a corpus pair");
      for (const TokenSeq& ref : ref_list)
        rout << it->second << "\t" << seq_to_text(ref) << "\n";
    }
  }
}

ParallelCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open '" + path + "'");
  ParallelCorpus corpus;
  GeneratorSpec& spec = corpus.spec;
  bool kind_seen = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("#!", 0) == 0) {
      std::vector<std::string> f = split_ws(line.substr(2));
      if (f.empty()) throw CorpusError("line " + std::to_string(line_no) + ": empty header");
      const std::string& key = f[0];
      auto need = [&](size_t n) {
        if (f.size() < n)
          throw CorpusError("line " + std::to_string(line_no) + ": header '" + key +
                            "' needs " + std::to_string(n - 1) + " fields");
      };
      if (key == "seed") {
        need(2);
        corpus.seed = std::stoull(f[1]);
      } else if (key == "kind") {
        need(2);
        kind_seen = true;
        if (f[1] == "two_mode") spec.kind = GeneratorSpec::Kind::TwoMode;
        else if (f[1] == "markov_corruption") spec.kind = GeneratorSpec::Kind::MarkovCorruption;
        else throw CorpusError("line " + std::to_string(line_no) + ": unknown kind " + f[1]);
      } else if (key == "n_sources") {
        need(2);
        spec.sources.resize(std::stoul(f[1]));
      } else if (key == "source") {
        need(2);
        size_t s = std::stoul(f[1]);
        if (s >= spec.sources.size())
          throw CorpusError("line " + std::to_string(line_no) + ": source index out of range");
        TokenSeq src;
        for (size_t i = 2; i < f.size(); ++i) src.push_back(symbol_token(f[i]));
        spec.sources[s].first = std::move(src);
      } else if (key == "mode") {
        need(3);
        size_t s = std::stoul(f[1]);
        if (s >= spec.sources.size())
          throw CorpusError("line " + std::to_string(line_no) + ": mode source out of range");
        GeneratorSpec::Mode m;
        m.prob = parse_double(f[2], line_no);
        for (size_t i = 3; i < f.size(); ++i) m.seq.push_back(symbol_token(f[i]));
        spec.sources[s].second.push_back(std::move(m));
      } else if (key == "num_tokens") {
        need(2);
        spec.num_tokens = std::stoi(f[1]);
      } else if (key == "replace_rate") {
        need(2);
        spec.replace_rate = parse_double(f[1], line_no);
      } else if (key == "drop_rate") {
        need(2);
        spec.drop_rate = parse_double(f[1], line_no);
      } else if (key == "len_min") {
        need(2);
        spec.len_min = std::stoi(f[1]);
      } else if (key == "len_max") {
        need(2);
        spec.len_max = std::stoi(f[1]);
      } else if (key == "init") {
        for (size_t i = 1; i < f.size(); ++i)
          spec.init_dist.push_back(parse_double(f[i], line_no));
      } else if (key == "trans") {
        need(2);
        size_t r = std::stoul(f[1]);
        if (spec.trans.size() <= r) spec.trans.resize(r + 1);
        for (size_t i = 2; i < f.size(); ++i)
          spec.trans[r].push_back(parse_double(f[i], line_no));
      } else {
        throw CorpusError("line " + std::to_string(line_no) + ": unknown header key '" +
                          key + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw CorpusError("line " + std::to_string(line_no) + ": missing tab separator");
    try {
      corpus.pairs.emplace_back(text_to_seq(line.substr(0, tab)),
                                text_to_seq(line.substr(tab + 1)));
    } catch (const std::exception& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!kind_seen) throw CorpusError("missing '#! kind' header in '" + path + "'");
  spec.validate();

  std::ifstream rin(path + ".refs");
  if (rin) {
    int rline = 0;
    while (std::getline(rin, line)) {
      ++rline;
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw CorpusError("refs line " + std::to_string(rline) + ": missing tab");
      size_t idx = std::stoul(line.substr(0, tab));
      if (idx >= corpus.pairs.size())
        throw CorpusError("refs line " + std::to_string(rline) + ": pair index out of range");
      corpus.refs[corpus.pairs[idx].first].push_back(text_to_seq(line.substr(tab + 1)));
    }
  }
  return corpus;
}

GeneratorSpec two_mode_toy_spec() {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::TwoMode;
  int a = kFirstToken, b = kFirstToken + 1, c = kFirstToken + 2, d = kFirstToken + 3;
  spec.sources = {{{kFirstToken + 4}, {{{a, b}, 0.5}, {{c, d}, 0.5}}}};
  return spec;
}

GeneratorSpec reversal_spec(int n_sources, int len, int alphabet, uint64_t seed) {
  if (len < 2 || alphabet < len) throw CorpusError("reversal_spec: need alphabet >= len >= 2");
  util::Rng rng(seed);
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::TwoMode;
  std::set<TokenSeq> seen;
  for (int s = 0; s < n_sources; ++s) {
    TokenSeq x;
    do {
      x.clear();
      for (int i = 0; i < len; ++i)
        x.push_back(kFirstToken + rng.uniform_int(0, alphabet - 1));
    } while (!seen.insert(x).second);
    std::vector<int> pool;
    for (int t = 0; t < alphabet; ++t) pool.push_back(kFirstToken + t);
    TokenSeq a;
    for (int i = 0; i < len; ++i) {
      int j = rng.uniform_int(i, alphabet - 1);
      std::swap(pool[i], pool[j]);
      a.push_back(pool[i]);
    }
    TokenSeq b(a.rbegin(), a.rend());
    spec.sources.push_back({std::move(x), {{std::move(a), 0.5}, {std::move(b), 0.5}}});
  }
  return spec;
}

GeneratorSpec shift_spec(int n_sources, int len, int alphabet, uint64_t seed) {
  if (len < 2 || alphabet < len + 1)
    throw CorpusError("shift_spec: need alphabet >= len + 1 >= 3");
  util::Rng rng(seed);
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::TwoMode;
  std::set<TokenSeq> seen;
  for (int s = 0; s < n_sources; ++s) {
    TokenSeq x;
    do {
      x.clear();
      for (int i = 0; i < len; ++i)
        x.push_back(kFirstToken + rng.uniform_int(0, alphabet - 1));
    } while (!seen.insert(x).second);
    std::vector<int> pool;
    for (int t = 0; t < alphabet; ++t) pool.push_back(kFirstToken + t);
    TokenSeq w;
    for (int i = 0; i < len + 1; ++i) {
      int j = rng.uniform_int(i, alphabet - 1);
      std::swap(pool[i], pool[j]);
      w.push_back(pool[i]);
    }
    TokenSeq a(w.begin(), w.end() - 1), b(w.begin() + 1, w.end());
    spec.sources.push_back({std::move(x), {{std::move(a), 0.5}, {std::move(b), 0.5}}});
  }
  return spec;
}

}  // namespace natlab::data
