#include "xmodal/taskgen.hpp"

#include <cmath>
#include <stdexcept>

#include "xmodal/rng.hpp"

namespace xmodal {

SymbolLayout symbol_layout(const Vocab& vocab) {
  const int usable = vocab.size() - Vocab::kReserved;
  if (usable < 4) throw std::invalid_argument("taskgen: vocab too small for any facts");
  SymbolLayout l;
  l.n_rel = std::max(2, usable / 5);
  l.n_ent = usable - l.n_rel;
  l.rel_base = Vocab::kReserved;
  l.ent_base = Vocab::kReserved + l.n_rel;
  return l;
}

Vocab make_default_vocab(int vocab_size) {
  if (vocab_size < 8) throw std::invalid_argument("taskgen: vocab_size must be >= 8");
  Vocab v;
  v.tokens = {"<pad>", "<bos>", "<eos>", "<sep>"};
  const int usable = vocab_size - Vocab::kReserved;
  const int n_rel = std::max(2, usable / 5);
  for (int i = 0; i < n_rel; ++i) v.tokens.push_back("R" + std::to_string(i));
  for (int i = 0; i < usable - n_rel; ++i) v.tokens.push_back("E" + std::to_string(i));
  v.validate();
  return v;
}

FactTable generate_facts(uint64_t seed, int n_facts, const Vocab& vocab) {
  if (n_facts < 0) throw std::invalid_argument("taskgen: n_facts must be >= 0");
  vocab.validate();
  const SymbolLayout l = symbol_layout(vocab);
  const int64_t expressible = static_cast<int64_t>(l.n_rel) * l.n_ent;
  if (n_facts > expressible) {
    throw std::invalid_argument("taskgen: vocab too small: " + std::to_string(n_facts) + " facts requested but only " +
                                std::to_string(expressible) + " distinct keys exist");
  }

  std::vector<std::pair<int, int>> keys;
  keys.reserve(static_cast<size_t>(expressible));
  for (int r = 0; r < l.n_rel; ++r)
    for (int e = 0; e < l.n_ent; ++e) keys.emplace_back(l.rel_base + r, l.ent_base + e);

  Rng rng(derive_seed(seed, 0));
  rng.shuffle(keys);

  FactTable t;
  for (int i = 0; i < n_facts; ++i) {
    Fact f;
    f.rel = keys[static_cast<size_t>(i)].first;
    f.ent = keys[static_cast<size_t>(i)].second;
    f.ans = l.ent_base + static_cast<int>(rng.below(static_cast<size_t>(l.n_ent)));
    t.facts.push_back(f);

    Sample s;
    s.id = i;
    s.q = {f.rel, f.ent};
    s.y = {f.ans, Vocab::kEos};
    s.split = "pretrain";
    t.qa.push_back(std::move(s));
  }
  return t;
}

Corpus generate_corpus(uint64_t seed, const GenConfig& cfg) {
  if (cfg.n_eval < 0 || cfg.n_eval >= cfg.n_facts) {
    throw std::invalid_argument("taskgen: need 0 <= n_eval < n_facts");
  }
  if (cfg.distill_prompts < 0) throw std::invalid_argument("taskgen: distill_prompts must be >= 0");

  Corpus c;
  c.vocab = make_default_vocab(cfg.vocab_size);
  c.table = generate_facts(seed, cfg.n_facts, c.vocab);
  c.pretrain = c.table.qa;

  const int n_eligible = cfg.n_facts - cfg.n_eval;
  for (int i = 0; i < cfg.n_eval; ++i) {
    const Fact& f = c.table.facts[static_cast<size_t>(n_eligible + i)];
    Sample s;
    s.id = 30000 + i;
    s.q = {f.rel, f.ent};
    s.y = {f.ans, Vocab::kEos};
    s.split = "eval";
    c.eval.push_back(std::move(s));
  }

  Rng rng(derive_seed(seed, 1));
  for (int i = 0; i < cfg.distill_prompts; ++i) {
    const Fact& f = c.table.facts[rng.below(static_cast<size_t>(n_eligible))];
    Sample s;
    s.id = 10000 + i;
    s.q = {f.rel, f.ent};
    s.y = {f.ans, Vocab::kEos};
    s.split = "distill";
    c.distill.push_back(s);
    s.id = 20000 + i;  // stressor twin
    c.naive.push_back(std::move(s));
  }
  return c;
}

std::pair<std::vector<Sample>, std::vector<Sample>> build_distill_corpus(
    const std::vector<Sample>& prompts, int t2t_parts, int s2t_parts) {
  if (t2t_parts <= 0 || s2t_parts <= 0) throw std::invalid_argument("taskgen: ratio parts must be positive");
  const double frac = static_cast<double>(t2t_parts) / (t2t_parts + s2t_parts);
  const size_t k = static_cast<size_t>(std::llround(frac * static_cast<double>(prompts.size())));
  std::vector<Sample> t2t(prompts.begin(), prompts.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<Sample> s2t(prompts.begin() + static_cast<std::ptrdiff_t>(k), prompts.end());
  return {std::move(t2t), std::move(s2t)};
}

}  // namespace xmodal
