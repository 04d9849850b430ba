#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "skillmatch/corpus.hpp"

namespace skillmatch {

// Dense {-1, 0, +1} relation matrix with labelled rows and columns.
struct SignedAdjacency {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::int8_t> values;  // row-major

  SignedAdjacency() = default;
  SignedAdjacency(std::vector<std::string> row_ids, std::vector<std::string> col_ids);

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return cols.size(); }
  std::int8_t operator()(std::size_t r, std::size_t c) const { return values[r * cols.size() + c]; }
  std::int8_t& operator()(std::size_t r, std::size_t c) { return values[r * cols.size() + c]; }

  std::size_t count_positive() const;
  std::size_t count_negative() const;
  // Zero on and below the diagonal.
  bool strictly_upper() const;
  bool operator==(const SignedAdjacency&) const = default;
};

// Throws std::logic_error when entries leave {-1,0,1} or, for square
// freelancer matrices with `upper` set, when anything sits on/below the diagonal.
void check_adjacency(const SignedAdjacency& a, bool upper);

// +1 / -1 for positive / negative interactions between listed ids, 0 elsewhere.
// Repeated pairs resolve to the latest timestamp (later records win ties).
SignedAdjacency build_interaction_adjacency(std::span<const Interaction> interactions,
                                            const std::vector<std::string>& projects,
                                            const std::vector<std::string>& freelancers);

// Freelancer relation through shared project pivots: sign of (A^T A)[f, f'],
// forced to 0 when the pair shares a negative pivot. Strictly upper-triangular.
SignedAdjacency transitive_freelancer_adjacency(const SignedAdjacency& project_freelancer);

// Adds -1 to every upper-triangular pair whose categories differ, then clamps
// to {-1, 0, 1}. Every freelancer must have a category.
SignedAdjacency add_weak_negatives(const SignedAdjacency& freelancer_adjacency,
                                   const std::map<std::string, std::string>& categories);

// Copies the upper triangle onto the lower one, so each row sees all relations.
SignedAdjacency mirrored(const SignedAdjacency& upper);

}  // namespace skillmatch
