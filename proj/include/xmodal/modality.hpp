#pragma once

#include <cstdint>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

// Deterministic text-to-frames surrogate: each token id owns a fixed
// "acoustic identity" row in the codebook, and synthesis emits that row a
// fixed number of times with seeded gaussian jitter on top. Desk-scale
// stand-in for a real TTS system.

constexpr int kFramesPerToken = 2;
constexpr int kFrameDim = 24;
constexpr double kDefaultJitterSigma = 0.05;
constexpr uint64_t kCodebookSeed = 0x0acb5eedULL;  // one codebook per vocab size, fixed forever

struct AcousticCodebook {
  Tensor rows;  // vocab x frame_dim

  int vocab() const { return rows.shape[0]; }
  int frame_dim() const { return rows.shape[1]; }

  // Seeded uniform(-1, 1) rows; generation fails if any two rows come out
  // closer than L2 distance 0.1 (they never do at these dimensions, but the
  // injectivity of synthesis rests on it, so it is checked).
  static AcousticCodebook generate(int vocab, int frame_dim = kFrameDim, uint64_t seed = kCodebookSeed);
};

struct SpeechQuery {
  Tensor frames;  // (frames_per_token * len(source_tokens)) x frame_dim
  // provenance
  std::vector<int> source_tokens;
  uint64_t seed = 0;
  double sigma = 0.0;
};

// frames_per_token consecutive frames per source token, each the codebook row
// plus gaussian jitter of stddev sigma. Deterministic given (q, seed, sigma).
SpeechQuery synthesize(const AcousticCodebook& codebook, const std::vector<int>& q, uint64_t seed, double sigma);

// Fills `frames` on every sample; per-sample seed is (seed XOR sample id), so
// the result is independent of sample order.
void synthesize_dataset(const AcousticCodebook& codebook, std::vector<Sample>& samples, uint64_t seed, double sigma);

}  // namespace xmodal
