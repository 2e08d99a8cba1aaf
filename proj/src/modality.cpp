#include "xmodal/modality.hpp"

#include <cmath>
#include <stdexcept>

#include "xmodal/rng.hpp"

namespace xmodal {

AcousticCodebook AcousticCodebook::generate(int vocab, int frame_dim, uint64_t seed) {
  if (vocab < 2 || frame_dim < 1) throw std::invalid_argument("codebook: need vocab >= 2, frame_dim >= 1");
  AcousticCodebook cb;
  cb.rows = Tensor({vocab, frame_dim});
  Rng rng(seed);
  for (double& v : cb.rows.data) v = rng.uniform(-1.0, 1.0);

  double min_d2 = 1e300;
  for (int i = 0; i < vocab; ++i) {
    for (int j = i + 1; j < vocab; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < frame_dim; ++c) {
        const double d = cb.rows.at(i, c) - cb.rows.at(j, c);
        d2 += d * d;
      }
      min_d2 = std::min(min_d2, d2);
    }
  }
  if (std::sqrt(min_d2) <= 0.1) {
    throw std::runtime_error("codebook: rows not distinct enough (min pairwise distance " +
                             std::to_string(std::sqrt(min_d2)) + ")");
  }
  return cb;
}

SpeechQuery synthesize(const AcousticCodebook& codebook, const std::vector<int>& q, uint64_t seed, double sigma) {
  if (q.empty()) throw std::invalid_argument("synthesize: empty query");
  if (sigma < 0.0) throw std::invalid_argument("synthesize: jitter stddev must be >= 0");
  const int w = codebook.frame_dim();
  for (int t : q) {
    if (t < 0 || t >= codebook.vocab()) {
      throw std::invalid_argument("synthesize: token id " + std::to_string(t) + " outside codebook (vocab " +
                                  std::to_string(codebook.vocab()) + ")");
    }
  }

  SpeechQuery sq;
  sq.source_tokens = q;
  sq.seed = seed;
  sq.sigma = sigma;
  sq.frames = Tensor({kFramesPerToken * static_cast<int>(q.size()), w});

  Rng rng(seed);
  int r = 0;
  for (int t : q) {
    for (int rep = 0; rep < kFramesPerToken; ++rep, ++r) {
      for (int c = 0; c < w; ++c) {
        sq.frames.at(r, c) = codebook.rows.at(t, c) + (sigma > 0.0 ? rng.gauss(0.0, sigma) : 0.0);
      }
    }
  }
  return sq;
}

void synthesize_dataset(const AcousticCodebook& codebook, std::vector<Sample>& samples, uint64_t seed, double sigma) {
  for (Sample& s : samples) {
    s.frames = synthesize(codebook, s.q, seed ^ static_cast<uint64_t>(s.id), sigma).frames;
  }
}

}  // namespace xmodal
