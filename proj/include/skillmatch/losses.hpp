#pragma once

#include <optional>
#include <string_view>

#include "skillmatch/adjacency.hpp"
#include "skillmatch/autograd.hpp"

namespace skillmatch {

enum class LossKind { dual_a_triplets, dual_a_info_nce };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view s);

// Triplet losses use Euclidean distance; InfoNCE losses use cosine scores.
// All embedding arguments are row-stacked [count x d].

// max(D(a, p) - D(a, n) + margin, 0) for single rows.
template <typename T>
Var<T> triplet_loss(const Var<T>& anchor, const Var<T>& positive, const Var<T>& negative,
                    std::type_identity_t<T> margin);

// Mean over positives of -log softmax(s / tau) taken over positives + negatives.
// Throws std::invalid_argument when there is no positive.
template <typename T>
Var<T> info_nce(const Var<T>& anchor, const Var<T>& positives, const Var<T>& negatives,
                std::type_identity_t<T> tau);

// Cosine similarity matrix [n x m].
template <typename T>
Var<T> cosine_scores(const Var<T>& a, const Var<T>& b);

// Sum of triplet losses over every (d, d+, d-) with A(d, d+) > 0 and A(d, d-) < 0,
// computed from the full masked [n x m*m] margin tensor. Zero when no triplet is valid.
template <typename T>
Var<T> a_triplets(const Var<T>& anchors, const Var<T>& candidates, const SignedAdjacency& a,
                  std::type_identity_t<T> margin);

// For every A(d, d') > 0: -log of the softmax over candidates with A(d, .) != 0,
// evaluated at d'; summed and divided by |A > 0|. nullopt when |A > 0| == 0.
template <typename T>
std::optional<Var<T>> a_info_nce(const Var<T>& anchors, const Var<T>& candidates, const SignedAdjacency& a,
                                 std::type_identity_t<T> tau);

template <typename T>
struct LossTerms {
  std::optional<Var<T>> total;
  std::optional<Var<T>> project_term;
  std::optional<Var<T>> freelancer_term;
};

// Project->freelancer term plus freelancer->freelancer term. The freelancer
// matrix is used as given (upper triangle), so each unordered freelancer
// triplet is counted once.
template <typename T>
LossTerms<T> dual_a_triplets(const Var<T>& projects, const Var<T>& freelancers, const SignedAdjacency& a_pf,
                             const SignedAdjacency& a_ff, std::type_identity_t<T> margin);

// The freelancer matrix is mirrored so that every anchor sees all its relations.
// `total` is nullopt when neither term has a positive pair.
template <typename T>
LossTerms<T> dual_a_info_nce(const Var<T>& projects, const Var<T>& freelancers, const SignedAdjacency& a_pf,
                             const SignedAdjacency& a_ff, std::type_identity_t<T> tau);

}  // namespace skillmatch
