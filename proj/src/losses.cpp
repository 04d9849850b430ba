#include "skillmatch/losses.hpp"

#include <stdexcept>
#include <string>

namespace skillmatch {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::dual_a_triplets ? "dual_a_triplets" : "dual_a_info_nce";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "dual_a_triplets" || s == "triplet" || s == "triplets") return LossKind::dual_a_triplets;
  if (s == "dual_a_info_nce" || s == "infonce" || s == "info_nce") return LossKind::dual_a_info_nce;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

namespace {

void check_shape(const SignedAdjacency& a, std::size_t rows, std::size_t cols, const char* what) {
  if (a.n_rows() != rows || a.n_cols() != cols) {
    throw ShapeError(std::string(what) + ": adjacency is " + std::to_string(a.n_rows()) + "x" +
                     std::to_string(a.n_cols()) + " but embeddings give " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

template <typename T>
Var<T> triplet_loss(const Var<T>& anchor, const Var<T>& positive, const Var<T>& negative,
                    std::type_identity_t<T> margin) {
  const auto dist = pairwise_distance(anchor, concat_rows(std::vector<Var<T>>{positive, negative}));
  // margins(0, i * 2 + j) = dist_i - dist_j + m; (i, j) = (positive, negative) is column 1.
  return relu(slice_cols(triplet_margins(dist, margin), 1, 1));
}

template <typename T>
Var<T> cosine_scores(const Var<T>& a, const Var<T>& b) {
  return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
}

template <typename T>
Var<T> info_nce(const Var<T>& anchor, const Var<T>& positives, const Var<T>& negatives,
                std::type_identity_t<T> tau) {
  const std::size_t n_pos = positives.rows();
  if (n_pos == 0) throw std::invalid_argument("info_nce: no positives");
  std::vector<Var<T>> parts{positives};
  if (negatives.rows() > 0) parts.push_back(negatives);
  const auto scores = cosine_scores(anchor, concat_rows(parts));
  const std::vector<std::uint8_t> mask(scores.cols(), 1);
  const auto log_p = masked_log_softmax(scores, std::span<const std::uint8_t>(mask), tau);
  return scale(sum(slice_cols(log_p, 0, n_pos)), -T{1} / static_cast<T>(n_pos));
}

template <typename T>
Var<T> a_triplets(const Var<T>& anchors, const Var<T>& candidates, const SignedAdjacency& a,
                  std::type_identity_t<T> margin) {
  const std::size_t n = anchors.rows(), m = candidates.rows();
  check_shape(a, n, m, "a_triplets");
  Tensor<T> valid(n, m * m);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t i = 0; i < m; ++i) {
      if (a(d, i) <= 0) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (a(d, j) < 0) valid(d, i * m + j) = T{1};
      }
    }
  }
  const auto losses = relu(triplet_margins(pairwise_distance(anchors, candidates), margin));
  return sum(hadamard(losses, anchors.tape().constant(std::move(valid))));
}

template <typename T>
std::optional<Var<T>> a_info_nce(const Var<T>& anchors, const Var<T>& candidates, const SignedAdjacency& a,
                                 std::type_identity_t<T> tau) {
  const std::size_t n = anchors.rows(), m = candidates.rows();
  check_shape(a, n, m, "a_info_nce");
  // Only anchors with at least one positive contribute; their rows always
  // have an allowed entry, which keeps the masked softmax well-defined.
  std::vector<std::size_t> rows;
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t j = 0; j < m; ++j) {
      if (a(d, j) > 0) {
        rows.push_back(d);
        break;
      }
    }
  }
  if (rows.empty()) return std::nullopt;
  std::vector<std::uint8_t> mask(rows.size() * m);
  Tensor<T> positive(rows.size(), m);
  std::size_t n_positive = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto v = a(rows[r], j);
      mask[r * m + j] = v != 0;
      if (v > 0) {
        positive(r, j) = T{1};
        ++n_positive;
      }
    }
  }
  auto& tape = anchors.tape();
  const Var<T> anchor_rows =
      rows.size() == n ? anchors : select_rows(anchors, std::span<const std::size_t>(rows));
  const auto log_p = masked_log_softmax(cosine_scores(anchor_rows, candidates), std::span<const std::uint8_t>(mask), tau);
  return scale(sum(hadamard(log_p, tape.constant(std::move(positive)))), -T{1} / static_cast<T>(n_positive));
}

template <typename T>
LossTerms<T> dual_a_triplets(const Var<T>& projects, const Var<T>& freelancers, const SignedAdjacency& a_pf,
                             const SignedAdjacency& a_ff, std::type_identity_t<T> margin) {
  LossTerms<T> out;
  out.project_term = a_triplets(projects, freelancers, a_pf, margin);
  out.freelancer_term = a_triplets(freelancers, freelancers, a_ff, margin);
  out.total = add(*out.project_term, *out.freelancer_term);
  return out;
}

template <typename T>
LossTerms<T> dual_a_info_nce(const Var<T>& projects, const Var<T>& freelancers, const SignedAdjacency& a_pf,
                             const SignedAdjacency& a_ff, std::type_identity_t<T> tau) {
  LossTerms<T> out;
  out.project_term = a_info_nce(projects, freelancers, a_pf, tau);
  out.freelancer_term = a_info_nce(freelancers, freelancers, mirrored(a_ff), tau);
  if (out.project_term && out.freelancer_term) {
    out.total = add(*out.project_term, *out.freelancer_term);
  } else if (out.project_term) {
    out.total = out.project_term;
  } else if (out.freelancer_term) {
    out.total = out.freelancer_term;
  }
  return out;
}

#define SKILLMATCH_INSTANTIATE(T)                                                                                  \
  template Var<T> triplet_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);                                  \
  template Var<T> info_nce<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);                                      \
  template Var<T> cosine_scores<T>(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> a_triplets<T>(const Var<T>&, const Var<T>&, const SignedAdjacency&, T);                           \
  template std::optional<Var<T>> a_info_nce<T>(const Var<T>&, const Var<T>&, const SignedAdjacency&, T);            \
  template LossTerms<T> dual_a_triplets<T>(const Var<T>&, const Var<T>&, const SignedAdjacency&,                    \
                                           const SignedAdjacency&, T);                                              \
  template LossTerms<T> dual_a_info_nce<T>(const Var<T>&, const Var<T>&, const SignedAdjacency&,                    \
                                           const SignedAdjacency&, T);

SKILLMATCH_INSTANTIATE(float)
SKILLMATCH_INSTANTIATE(double)
#undef SKILLMATCH_INSTANTIATE

}  // namespace skillmatch
