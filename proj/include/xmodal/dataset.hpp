#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

// One QA item. Serialized as a single JSONL line with fields
// {"id", "q", "y", "yhat"?, "frames"?, "split"}; token sequences are arrays
// of ids, frames are arrays of per-frame arrays rounded to 6 decimals.
struct Sample {
  int64_t id = 0;
  std::vector<int> q;  // text-form question
  std::vector<int> y;  // gold answer, ends with EOS
  std::optional<std::vector<int>> yhat;  // cached teacher-generated answer
  std::optional<Tensor> frames;          // synthesized speech question
  std::string split;                     // pretrain | distill | eval
};

std::vector<Sample> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Sample>& samples, const std::string& path);

void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace xmodal
