#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stop_token>
#include <utility>
#include <vector>

#include "polopt/bitvec.hpp"
#include "polopt/domain.hpp"
#include "polopt/rng.hpp"

namespace polopt {

// floor((gene_count * 2^avg_active / avg_active) / 2), saturating at INT_MAX.
int population_size(int gene_count, double avg_active);

// A uniformly random nonempty bit vector (fair coin per bit, redrawn if empty).
BitVector random_nonempty(std::size_t gene_count, Rng& rng);

// `size` distinct nonempty bit vectors. Throws ValidationError when size
// exceeds 2^gene_count - 1.
std::vector<BitVector> init_population(std::size_t size, std::size_t gene_count, Rng& rng);

// Shifted roulette weights: (f - f_min) + 0.01 (f_max - f_min) over non-gated
// members, 0 for gated ones.
std::vector<double> roulette_weights(std::span<const double> fitness,
                                     std::span<const char> gated);
// Throws EvaluationError when every member is gated.
std::size_t roulette_select(std::span<const double> fitness, std::span<const char> gated,
                            Rng& rng);

// Child c takes a outside the 1-based window [i, j] and b inside it; d is the
// reverse. The rng overload draws 1 <= i <= j <= n.
std::pair<BitVector, BitVector> two_point_crossover(const BitVector& a, const BitVector& b,
                                                    std::size_t i, std::size_t j);
std::pair<BitVector, BitVector> two_point_crossover(const BitVector& a, const BitVector& b,
                                                    Rng& rng);

// Flips each bit with probability p. An empty result is redrawn from the input
// up to 100 times, then one random bit is set.
BitVector mutate(const BitVector& c, double p, Rng& rng);

using Objective = std::function<FitnessBreakdown(const BitVector&)>;

struct GaParams {
  std::size_t population = 50;
  double crossover_chance = 0.80;
  double mutation_chance = 0.03;
  int elitism_k = 3;
  int stall_generations = 10;
  int max_generations = 1000;
  int workers = 1;
  std::uint64_t seed = 0;
};

GaParams ga_params(const RunConfig& config, std::size_t population);

struct Member {
  BitVector bits;
  FitnessBreakdown fit;
};

struct EvolveHooks {
  std::function<void(const GenerationRecord&)> on_generation;
  // Sees every evaluated population, in generation order.
  std::function<void(int generation, std::span<const Member>)> on_population;
  std::stop_token stop;
};

struct EvolveResult {
  std::vector<GenerationRecord> generations;
  BitVector best;
  FitnessBreakdown best_fit;
  StopReason stopped_reason = StopReason::stall;
  bool cancelled = false;
  std::size_t evaluations = 0;
};

// Generational GA with elitism, duplicate rejection and stall stopping. The
// objective must be thread-safe when params.workers > 1. Random draws happen
// on one stream in a fixed order: initial population, then per generation
// (parent a, parent b, crossover coin, crossover points, mutation of each
// child) pair by pair.
EvolveResult evolve(const GaParams& params, std::size_t gene_count, const Objective& objective,
                    const EvolveHooks& hooks = {});

struct SearchResult {
  BitVector bits;
  FitnessBreakdown fit;
  std::size_t evaluations = 0;
};

// Evaluates all 2^n - 1 nonempty vectors; ties go to the lowest value.
// Throws ValidationError for n > 20 or n == 0.
SearchResult exhaustive_search(std::size_t gene_count, const Objective& objective,
                               int workers = 1);

}  // namespace polopt
