#include "skillmatch/adjacency.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace skillmatch {

SignedAdjacency::SignedAdjacency(std::vector<std::string> row_ids, std::vector<std::string> col_ids)
    : rows(std::move(row_ids)), cols(std::move(col_ids)), values(rows.size() * cols.size(), 0) {}

std::size_t SignedAdjacency::count_positive() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v > 0; }));
}

std::size_t SignedAdjacency::count_negative() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v < 0; }));
}

bool SignedAdjacency::strictly_upper() const {
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t c = 0; c < std::min(r + 1, n_cols()); ++c) {
      if ((*this)(r, c) != 0) return false;
    }
  }
  return true;
}

void check_adjacency(const SignedAdjacency& a, bool upper) {
  if (a.values.size() != a.n_rows() * a.n_cols()) throw std::logic_error("adjacency: value count mismatch");
  for (auto v : a.values) {
    if (v < -1 || v > 1) throw std::logic_error("adjacency: entry outside {-1,0,1}");
  }
  if (upper) {
    if (a.n_rows() != a.n_cols()) throw std::logic_error("adjacency: freelancer matrix is not square");
    if (!a.strictly_upper()) throw std::logic_error("adjacency: freelancer matrix is not strictly upper-triangular");
  }
}

SignedAdjacency build_interaction_adjacency(std::span<const Interaction> interactions,
                                            const std::vector<std::string>& projects,
                                            const std::vector<std::string>& freelancers) {
  SignedAdjacency a(projects, freelancers);
  std::unordered_map<std::string_view, std::size_t> prow, fcol;
  for (std::size_t i = 0; i < projects.size(); ++i) prow.emplace(a.rows[i], i);
  for (std::size_t j = 0; j < freelancers.size(); ++j) fcol.emplace(a.cols[j], j);
  std::vector<std::int64_t> stamp(a.values.size(), 0);
  std::vector<bool> seen(a.values.size(), false);
  for (const auto& it : interactions) {
    auto p = prow.find(it.project_id);
    auto f = fcol.find(it.freelancer_id);
    if (p == prow.end() || f == fcol.end()) continue;
    const std::size_t k = p->second * a.n_cols() + f->second;
    if (seen[k] && it.timestamp < stamp[k]) continue;
    seen[k] = true;
    stamp[k] = it.timestamp;
    a.values[k] = it.label == Label::positive ? 1 : -1;
  }
  return a;
}

SignedAdjacency transitive_freelancer_adjacency(const SignedAdjacency& pf) {
  const std::size_t n_p = pf.n_rows(), n_f = pf.n_cols();
  SignedAdjacency out(pf.cols, pf.cols);
  for (std::size_t f = 0; f < n_f; ++f) {
    for (std::size_t g = f + 1; g < n_f; ++g) {
      int gram = 0;
      int shared_negative = 0;
      for (std::size_t p = 0; p < n_p; ++p) {
        const int a = pf(p, f), b = pf(p, g);
        gram += a * b;
        shared_negative += (a < 0 && b < 0) ? 1 : 0;
      }
      out(f, g) = shared_negative > 0 ? 0 : static_cast<std::int8_t>((gram > 0) - (gram < 0));
    }
  }
  return out;
}

SignedAdjacency add_weak_negatives(const SignedAdjacency& ff, const std::map<std::string, std::string>& categories) {
  if (ff.n_rows() != ff.n_cols()) throw std::invalid_argument("add_weak_negatives: matrix is not square");
  std::vector<const std::string*> cat(ff.n_cols());
  for (std::size_t i = 0; i < ff.n_cols(); ++i) {
    auto it = categories.find(ff.cols[i]);
    if (it == categories.end() || it->second.empty()) {
      throw std::invalid_argument("add_weak_negatives: freelancer '" + ff.cols[i] + "' has no category");
    }
    cat[i] = &it->second;
  }
  SignedAdjacency out = ff;
  for (std::size_t f = 0; f < ff.n_rows(); ++f) {
    for (std::size_t g = f + 1; g < ff.n_cols(); ++g) {
      if (*cat[f] == *cat[g]) continue;
      out(f, g) = static_cast<std::int8_t>(std::clamp(ff(f, g) - 1, -1, 1));
    }
  }
  return out;
}

SignedAdjacency mirrored(const SignedAdjacency& upper) {
  if (upper.n_rows() != upper.n_cols()) throw std::invalid_argument("mirrored: matrix is not square");
  SignedAdjacency out = upper;
  for (std::size_t f = 0; f < upper.n_rows(); ++f) {
    for (std::size_t g = f + 1; g < upper.n_cols(); ++g) out(g, f) = upper(f, g);
  }
  return out;
}

}  // namespace skillmatch
