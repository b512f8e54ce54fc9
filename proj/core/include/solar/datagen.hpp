#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "solar/matrix.hpp"
#include "solar/rng.hpp"

namespace solar {

// Item embedding table generated as A * B so its rank is bounded by
// true_rank. In shared-component mode every item additionally carries a
// common direction c0 scaled by shared_strength, the construction behind
// the highly correlated candidate-set experiments.
struct ItemCatalog {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::size_t true_rank = 0;
  double shared_strength = 0.0;
  Matrix embeddings;  // vocab_size x dim
};

ItemCatalog gen_catalog(std::size_t vocab, std::size_t dim, std::size_t true_rank,
                        std::uint64_t seed, double shared_strength = 0.0);

// One ranking request: a user history, a candidate set, Bernoulli labels and
// the generator-side ground truth eta*.
struct RankingInstance {
  std::uint64_t user_id = 0;
  std::vector<std::size_t> history;
  std::vector<std::size_t> candidates;
  std::vector<int> labels;
  std::vector<double> eta_star;
};

// Label-model weights. eta*(i) depends on the co-displayed candidates through
// the nearest-neighbor cosine penalty, which is what makes contextual flips
// (preference orders that reverse between candidate sets) realizable.
struct FlipSpec {
  double base_weight = 2.0;     // a: affinity term weight
  double penalty_weight = 4.0;  // b: max co-candidate cosine penalty
  double noise = 0.1;           // user-vector noise scale
  bool force_mixed = false;     // guarantee >= 1 positive and >= 1 negative
};

// eta*(i) = sigmoid(a <u, x_i> - b max_{j != i} cos(x_i, x_j)), u = mean of
// history embeddings + noise; labels ~ Bernoulli(eta*).
RankingInstance gen_instance(const ItemCatalog &catalog, std::size_t n_hist,
                             std::size_t m, const FlipSpec &flip, Rng &rng,
                             std::uint64_t user_id = 0);

std::vector<RankingInstance> gen_dataset(const ItemCatalog &catalog,
                                         std::size_t users, std::size_t n_hist,
                                         std::size_t m, const FlipSpec &flip,
                                         std::uint64_t seed);

// Line-delimited persistence: one instance per line, fields in fixed order
// (user_id, history ids, candidate ids, labels, eta_star), reals at 17
// significant digits. Round-trips byte-identically.
void write_dataset(const std::string &path, const std::vector<RankingInstance> &data);
std::vector<RankingInstance> read_dataset(const std::string &path);

std::string format_instance(const RankingInstance &inst);
RankingInstance parse_instance(const std::string &line, std::size_t line_no);

// Recomputes eta* for an explicit candidate set, used by the contextual-flip
// checks to evaluate the same item under two contexts.
std::vector<double> eta_star_for(const ItemCatalog &catalog,
                                 const std::vector<double> &user_vec,
                                 const std::vector<std::size_t> &candidates,
                                 const FlipSpec &flip);

}  // namespace solar
