#include "polopt/ga.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fmt/format.h>
#include <unordered_map>
#include <unordered_set>

#include "polopt/error.hpp"
#include "polopt/parallel.hpp"

namespace polopt {

namespace {

constexpr int kDuplicateRetries = 50;
constexpr int kEmptyRedraws = 100;
constexpr double kRouletteEpsilon = 0.01;

// Index of the best member: highest total, lowest bit vector on ties.
std::size_t best_index(std::span<const Member> members) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const double a = members[i].fit.total;
    const double b = members[best].fit.total;
    if (a > b || (a == b && members[i].bits < members[best].bits)) best = i;
  }
  return best;
}

bool ranks_before(const Member& a, const Member& b) {
  if (a.fit.total != b.fit.total) return a.fit.total > b.fit.total;
  return a.bits < b.bits;
}

}  // namespace

int population_size(int gene_count, double avg_active) {
  if (gene_count < 1) throw ValidationError("population_size: gene_count must be >= 1");
  if (!(avg_active >= 1.0)) throw ValidationError("population_size: avg_active must be >= 1");
  const double v = std::floor(gene_count * std::exp2(avg_active) / avg_active / 2.0);
  if (v >= static_cast<double>(INT_MAX)) return INT_MAX;
  return static_cast<int>(v);
}

BitVector random_nonempty(std::size_t gene_count, Rng& rng) {
  if (gene_count == 0) throw ValidationError("cannot draw a chromosome over an empty gene space");
  for (;;) {
    BitVector b(gene_count);
    for (std::size_t i = 0; i < gene_count; ++i) b.set(i, rng.below(2) == 1);
    if (b.any()) return b;
  }
}

std::vector<BitVector> init_population(std::size_t size, std::size_t gene_count, Rng& rng) {
  if (gene_count < 64 && size > (std::uint64_t{1} << gene_count) - 1) {
    throw ValidationError(fmt::format(
        "population of {} exceeds the {} distinct nonempty subsets of {} genes", size,
        (std::uint64_t{1} << gene_count) - 1, gene_count));
  }
  std::vector<BitVector> out;
  out.reserve(size);
  std::unordered_set<BitVector, BitVectorHash> seen;
  while (out.size() < size) {
    BitVector b = random_nonempty(gene_count, rng);
    if (seen.insert(b).second) out.push_back(std::move(b));
  }
  return out;
}

std::vector<double> roulette_weights(std::span<const double> fitness,
                                     std::span<const char> gated) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    if (gated[i]) continue;
    if (!any) {
      lo = hi = fitness[i];
      any = true;
    }
    lo = std::min(lo, fitness[i]);
    hi = std::max(hi, fitness[i]);
  }
  std::vector<double> w(fitness.size(), 0.0);
  if (!any) return w;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    if (!gated[i]) w[i] = (fitness[i] - lo) + kRouletteEpsilon * (hi - lo);
  }
  return w;
}

std::size_t roulette_select(std::span<const double> fitness, std::span<const char> gated,
                            Rng& rng) {
  const std::vector<double> w = roulette_weights(fitness, gated);
  std::vector<std::size_t> live;
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!gated[i]) live.push_back(i);
    total += w[i];
  }
  if (live.empty()) {
    throw EvaluationError("every member of the population is gated; nothing can be selected");
  }
  if (!(total > 0.0)) return live[rng.below(live.size())];

  const double r = rng.uniform01() * total;
  double acc = 0.0;
  std::size_t last = live.front();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (r < acc) return i;
  }
  return last;
}

std::pair<BitVector, BitVector> two_point_crossover(const BitVector& a, const BitVector& b,
                                                    std::size_t i, std::size_t j) {
  const std::size_t n = a.size();
  if (b.size() != n) throw ValidationError("crossover: parents differ in length");
  if (i < 1 || i > j || j > n) {
    throw ValidationError(fmt::format("crossover: need 1 <= i <= j <= {}, got ({}, {})", n, i, j));
  }
  BitVector c = a;
  BitVector d = b;
  for (std::size_t t = i - 1; t < j; ++t) {
    c.set(t, b.test(t));
    d.set(t, a.test(t));
  }
  return {std::move(c), std::move(d)};
}

std::pair<BitVector, BitVector> two_point_crossover(const BitVector& a, const BitVector& b,
                                                    Rng& rng) {
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("crossover: parents need at least 2 genes");
  std::size_t i = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(n)));
  std::size_t j = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(n)));
  if (i > j) std::swap(i, j);
  return two_point_crossover(a, b, i, j);
}

BitVector mutate(const BitVector& c, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw ValidationError("mutate: p must be in [0, 1]");
  if (c.size() == 0) throw ValidationError("mutate: empty chromosome");
  for (int attempt = 0; attempt < kEmptyRedraws; ++attempt) {
    BitVector out = c;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (rng.bernoulli(p)) out.flip(i);
    }
    if (out.any()) return out;
  }
  BitVector out(c.size());
  out.set(rng.below(c.size()));
  return out;
}

GaParams ga_params(const RunConfig& config, std::size_t population) {
  GaParams p;
  p.population = population;
  p.crossover_chance = config.crossover_chance;
  p.mutation_chance = config.mutation_chance;
  p.elitism_k = config.elitism_k;
  p.stall_generations = config.stall_generations;
  p.max_generations = config.max_generations;
  p.workers = config.workers;
  p.seed = config.seed;
  return p;
}

EvolveResult evolve(const GaParams& params, std::size_t gene_count, const Objective& objective,
                    const EvolveHooks& hooks) {
  if (params.population < 1) throw ConfigError("population must be >= 1");
  if (params.elitism_k < 0 || static_cast<std::size_t>(params.elitism_k) >= params.population) {
    throw ConfigError(fmt::format("elitism_k {} must be in [0, population {})", params.elitism_k,
                                  params.population));
  }
  if (params.stall_generations < 1) throw ConfigError("stall_generations must be >= 1");
  if (params.max_generations < 1) throw ConfigError("max_generations must be >= 1");
  if (params.crossover_chance < 0.0 || params.crossover_chance > 1.0 ||
      params.mutation_chance < 0.0 || params.mutation_chance > 1.0) {
    throw ConfigError("crossover and mutation chances must be in [0, 1]");
  }

  Rng rng(params.seed);
  std::unordered_map<BitVector, FitnessBreakdown, BitVectorHash> memo;
  EvolveResult result;

  // Evaluates a generation through the memo; returns false when cancelled.
  auto evaluate = [&](std::vector<Member>& members, GenerationRecord& rec) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (!memo.contains(members[i].bits)) todo.push_back(i);
    }
    std::vector<FitnessBreakdown> fresh(todo.size());
    parallel_for(
        todo.size(), params.workers,
        [&](std::size_t k) { fresh[k] = objective(members[todo[k]].bits); }, hooks.stop);
    if (hooks.stop.stop_requested()) return false;
    for (std::size_t k = 0; k < todo.size(); ++k) memo.emplace(members[todo[k]].bits, fresh[k]);
    for (Member& m : members) m.fit = memo.at(m.bits);
    rec.evaluations_performed = static_cast<int>(todo.size());
    rec.cache_hits = static_cast<int>(members.size() - todo.size());
    result.evaluations += todo.size();
    return true;
  };

  std::vector<Member> pop;
  for (BitVector& b : init_population(params.population, gene_count, rng)) {
    pop.push_back({std::move(b), {}});
  }

  double best_so_far = 0.0;
  int stall = 0;
  for (int g = 0;; ++g) {
    GenerationRecord rec;
    rec.index = g;
    if (!evaluate(pop, rec)) {
      result.cancelled = true;
      break;
    }
    if (hooks.on_population) hooks.on_population(g, pop);

    const std::size_t bi = best_index(pop);
    double sum = 0.0;
    std::size_t live = 0;
    for (const Member& m : pop) {
      if (m.fit.gated) continue;
      sum += m.fit.total;
      ++live;
    }
    if (live == 0) {
      throw EvaluationError(fmt::format(
          "generation {}: every chromosome was gated by the plausibility threshold", g));
    }
    rec.best_fitness = pop[bi].fit.total;
    rec.mean_fitness = sum / static_cast<double>(live);
    rec.best_bits = pop[bi].bits;
    result.generations.push_back(rec);
    if (hooks.on_generation) hooks.on_generation(rec);

    if (g == 0 || rec.best_fitness > best_so_far) {
      best_so_far = rec.best_fitness;
      result.best = pop[bi].bits;
      result.best_fit = pop[bi].fit;
      stall = 0;
    } else {
      ++stall;
    }
    if (stall >= params.stall_generations) {
      result.stopped_reason = StopReason::stall;
      break;
    }
    if (static_cast<int>(result.generations.size()) >= params.max_generations) {
      result.stopped_reason = StopReason::max_generations;
      break;
    }
    if (hooks.stop.stop_requested()) {
      result.cancelled = true;
      break;
    }

    // Next generation: elites first, unmutated.
    std::vector<const Member*> ranked;
    for (const Member& m : pop) {
      if (!m.fit.gated) ranked.push_back(&m);
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const Member* a, const Member* b) { return ranks_before(*a, *b); });

    std::vector<Member> next;
    next.reserve(params.population);
    std::unordered_set<BitVector, BitVectorHash> seen;
    for (std::size_t e = 0; e < ranked.size() && e < static_cast<std::size_t>(params.elitism_k);
         ++e) {
      next.push_back({ranked[e]->bits, {}});
      seen.insert(ranked[e]->bits);
    }

    std::vector<double> fit(pop.size());
    std::vector<char> gated(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
      fit[i] = pop[i].fit.total;
      gated[i] = pop[i].fit.gated ? 1 : 0;
    }

    int rejected = 0;
    while (next.size() < params.population) {
      const BitVector& a = pop[roulette_select(fit, gated, rng)].bits;
      const BitVector& b = pop[roulette_select(fit, gated, rng)].bits;
      std::pair<BitVector, BitVector> kids;
      if (rng.bernoulli(params.crossover_chance) && gene_count >= 2) {
        kids = two_point_crossover(a, b, rng);
      } else {
        kids = {a, b};
      }
      for (BitVector* child : {&kids.first, &kids.second}) {
        if (next.size() >= params.population) break;
        BitVector m = mutate(*child, params.mutation_chance, rng);
        if (seen.insert(m).second) {
          next.push_back({std::move(m), {}});
          rejected = 0;
        } else if (++rejected >= kDuplicateRetries) {
          BitVector fresh = random_nonempty(gene_count, rng);
          while (!seen.insert(fresh).second) fresh = random_nonempty(gene_count, rng);
          next.push_back({std::move(fresh), {}});
          rejected = 0;
        }
      }
    }
    pop = std::move(next);
  }
  return result;
}

SearchResult exhaustive_search(std::size_t gene_count, const Objective& objective, int workers) {
  if (gene_count == 0 || gene_count > 20) {
    throw ValidationError(
        fmt::format("exhaustive search supports 1..20 genes, got {}", gene_count));
  }
  const std::uint64_t total = (std::uint64_t{1} << gene_count) - 1;
  const std::size_t chunks = static_cast<std::size_t>(std::max(1, workers)) * 8;
  struct Local {
    bool set = false;
    BitVector bits;
    FitnessBreakdown fit;
  };
  std::vector<Local> best(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::uint64_t lo = 1 + total * c / chunks;
    const std::uint64_t hi = 1 + total * (c + 1) / chunks;
    for (std::uint64_t v = lo; v < hi; ++v) {
      BitVector bits = BitVector::from_value(gene_count, v);
      FitnessBreakdown f = objective(bits);
      // Values rise within a chunk, so strict > keeps the lowest on ties.
      if (!best[c].set || f.total > best[c].fit.total) best[c] = {true, std::move(bits), f};
    }
  });
  SearchResult out;
  bool set = false;
  for (Local& l : best) {  // chunks ascend in value
    if (!l.set) continue;
    if (!set || l.fit.total > out.fit.total) {
      out.bits = std::move(l.bits);
      out.fit = l.fit;
      set = true;
    }
  }
  out.evaluations = static_cast<std::size_t>(total);
  return out;
}

}  // namespace polopt
