#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

// Synthetic QA corpora. A "fact" is a (relation, entity) key mapped to a
// random answer entity; the question is the two key tokens, the answer is the
// value token plus EOS. Facts are the knowledge a model can forget: the
// teacher pretrains on all of them, a held-out slice is reserved for
// evaluation and never appears in any distillation corpus.

struct Fact {
  int rel = 0;
  int ent = 0;
  int ans = 0;
};

struct SymbolLayout {
  int rel_base = 0;
  int n_rel = 0;
  int ent_base = 0;
  int n_ent = 0;
};

// Ids after the reserved block: first fifth relations, the rest entities.
SymbolLayout symbol_layout(const Vocab& vocab);

Vocab make_default_vocab(int vocab_size = 64);

struct FactTable {
  std::vector<Fact> facts;  // unique keys, deterministic order
  std::vector<Sample> qa;   // one pretrain sample per fact, ids 0..n-1
};

// Deterministic knowledge base. Throws if the vocab cannot express n_facts
// distinct keys.
FactTable generate_facts(uint64_t seed, int n_facts, const Vocab& vocab);

struct GenConfig {
  int vocab_size = 64;
  int n_facts = 512;
  int n_eval = 128;          // eval-only keys, held out of every distill corpus
  int distill_prompts = 600; // drawn (with repetition) from the remaining keys
};

struct Corpus {
  Vocab vocab;
  FactTable table;
  std::vector<Sample> pretrain;  // all facts, split "pretrain"
  std::vector<Sample> distill;   // prompts over non-eval keys, split "distill"
  std::vector<Sample> naive;     // same prompt distribution, fresh ids; the
                                 // CE-only speech fine-tune stressor
  std::vector<Sample> eval;      // the held-out keys, split "eval"
};

Corpus generate_corpus(uint64_t seed, const GenConfig& cfg = {});

// Partition prompts into the two training channels at the given ratio
// (t2t_parts : s2t_parts). Disjoint, exhaustive, sizes within one sample of
// the exact ratio.
std::pair<std::vector<Sample>, std::vector<Sample>> build_distill_corpus(
    const std::vector<Sample>& prompts, int t2t_parts, int s2t_parts);

}  // namespace xmodal
