#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace xmodal {

// Symbol table shared by every model and dataset in a run. Ids are dense and
// the first four are fixed control tokens.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kReserved = 4;

  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }

  void validate() const {
    if (size() < 8) throw std::invalid_argument("vocab: need at least 8 tokens, got " + std::to_string(size()));
    static const char* reserved[] = {"<pad>", "<bos>", "<eos>", "<sep>"};
    for (int i = 0; i < kReserved; ++i) {
      if (tokens[i] != reserved[i]) {
        throw std::invalid_argument("vocab: token " + std::to_string(i) + " must be " + reserved[i] +
                                    ", got '" + tokens[i] + "'");
      }
    }
    for (size_t i = 0; i < tokens.size(); ++i) {
      for (size_t j = i + 1; j < tokens.size(); ++j) {
        if (tokens[i] == tokens[j]) throw std::invalid_argument("vocab: duplicate token '" + tokens[i] + "'");
      }
    }
  }
};

}  // namespace xmodal
