#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace natlab::data {

// Reserved token ids shared by every corpus and model in the lab.
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kMask = 3;
constexpr int kEps = 4;
constexpr int kFirstToken = 5;  // first ordinary vocabulary id

using TokenSeq = std::vector<int>;

inline std::string token_symbol(int id) {
  switch (id) {
    case kPad: return "<pad>";
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    case kMask: return "<mask>";
    case kEps: return "<eps>";
    default:
      if (id < 0) throw std::invalid_argument("token_symbol: negative id");
      return "w" + std::to_string(id - kFirstToken);
  }
}

inline int symbol_token(const std::string& s) {
  if (s == "<pad>") return kPad;
  if (s == "<bos>") return kBos;
  if (s == "<eos>") return kEos;
  if (s == "<mask>") return kMask;
  if (s == "<eps>") return kEps;
  if (s.size() >= 2 && s[0] == 'w') return kFirstToken + std::stoi(s.substr(1));
  throw std::invalid_argument("unknown token symbol: " + s);
}

inline std::string seq_to_text(const TokenSeq& seq) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += token_symbol(seq[i]);
  }
  return out;
}

TokenSeq text_to_seq(const std::string& text);

}  // namespace natlab::data
