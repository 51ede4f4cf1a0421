#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"
#include "joinplan_detail.hpp"

namespace fslab {

JoiningTarget JoiningTarget::product() { return {{{Kind::Product, 0, 1.0}}}; }
JoiningTarget JoiningTarget::diagonal() { return {{{Kind::Diagonal, 0, 1.0}}}; }
JoiningTarget JoiningTarget::shifted_diagonal(std::int64_t m) {
  return {{{Kind::ShiftedDiagonal, m, 1.0}}};
}

JoiningTarget JoiningTarget::mixture(std::vector<Component> parts) {
  require(!parts.empty(), ErrorKind::InvalidArgument, "mixture needs at least one component");
  double total = 0.0;
  for (const auto& p : parts) {
    require(p.weight >= 0.0 && std::isfinite(p.weight), ErrorKind::InvalidArgument,
            "mixture weights must be nonnegative");
    total += p.weight;
  }
  require(std::fabs(total - 1.0) <= 1e-9, ErrorKind::InvalidArgument, "mixture weights must sum to 1");
  return {std::move(parts)};
}

namespace {

JoiningTarget::Component parse_component(const std::string& text) {
  using K = JoiningTarget::Kind;
  if (text == "product") return {K::Product, 0, 1.0};
  if (text == "diagonal") return {K::Diagonal, 0, 1.0};
  const std::string prefix = "shifted_diagonal";
  if (text.rfind(prefix, 0) == 0) {
    std::int64_t m = 1;
    if (text.size() > prefix.size()) {
      require(text[prefix.size()] == ':', ErrorKind::InvalidArgument,
              "expected shifted_diagonal:m, got '" + text + "'");
      try {
        std::size_t used = 0;
        const std::string body = text.substr(prefix.size() + 1);
        m = std::stoll(body, &used);
        require(used == body.size(), ErrorKind::InvalidArgument, "bad shift in '" + text + "'");
      } catch (const std::logic_error&) {
        fail(ErrorKind::InvalidArgument, "bad shift in '" + text + "'");
      }
    }
    return {K::ShiftedDiagonal, m, 1.0};
  }
  fail(ErrorKind::InvalidArgument, "unknown joining '" + text +
                                       "' (product, diagonal, shifted_diagonal:m, mixture:...)");
}

}  // namespace

JoiningTarget JoiningTarget::parse(const std::string& text) {
  const std::string prefix = "mixture:";
  if (text.rfind(prefix, 0) != 0) return {{parse_component(text)}};
  std::vector<Component> parts;
  std::stringstream body(text.substr(prefix.size()));
  std::string item;
  while (std::getline(body, item, '+')) {
    const auto star = item.find('*');
    require(star != std::string::npos, ErrorKind::InvalidArgument,
            "mixture terms look like w*kind, got '" + item + "'");
    Component c = parse_component(item.substr(star + 1));
    try {
      c.weight = std::stod(item.substr(0, star));
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidArgument, "bad mixture weight in '" + item + "'");
    }
    parts.push_back(c);
  }
  return mixture(std::move(parts));
}

std::string JoiningTarget::to_string() const {
  auto one = [](const Component& c) -> std::string {
    switch (c.kind) {
      case Kind::Product: return "product";
      case Kind::Diagonal: return "diagonal";
      case Kind::ShiftedDiagonal: return "shifted_diagonal:" + std::to_string(c.shift);
    }
    return "?";
  };
  if (components.size() == 1 && components[0].weight == 1.0) return one(components[0]);
  std::ostringstream out;
  out << "mixture:";
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (i) out << '+';
    out << components[i].weight << '*' << one(components[i]);
  }
  return out.str();
}

bool JoiningTarget::has_product() const {
  return std::any_of(components.begin(), components.end(),
                     [](const Component& c) { return c.kind == Kind::Product && c.weight > 0.0; });
}

namespace {

/// lambda(i,j) = w_prod kappa_i kappa_j + sparse(i,j) over labels 0..K-1 of a
/// finite index set, the shift acting cyclically.
struct SparseJoining {
  std::uint64_t N = 0;
  std::uint32_t K = 0;
  std::vector<std::uint64_t> counts;
  std::vector<double> kappa;
  double w_prod = 0.0;
  std::unordered_map<std::uint64_t, double> sparse;

  std::uint64_t key(std::uint32_t i, std::uint32_t j) const { return std::uint64_t(i) * K + j; }

  double lambda(std::uint32_t i, std::uint32_t j) const {
    double v = w_prod > 0.0 ? w_prod * kappa[i] * kappa[j] : 0.0;
    if (auto it = sparse.find(key(i, j)); it != sparse.end()) v += it->second;
    return v;
  }

  /// Extreme of kappa_i kappa_j over nonempty atom pairs whose key fails in_set.
  template <class InSet>
  double product_extreme(bool largest, InSet in_set) const {
    std::vector<std::uint32_t> order;
    for (std::uint32_t i = 0; i < K; ++i) {
      if (counts[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return largest ? kappa[a] > kappa[b] : kappa[a] < kappa[b];
    });
    double best = largest ? -1.0 : std::numeric_limits<double>::infinity();
    for (std::uint32_t i : order) {
      for (std::uint32_t j : order) {
        if (in_set(key(i, j))) continue;
        const double v = kappa[i] * kappa[j];
        if (largest ? v > best : v < best) best = v;
        break;
      }
    }
    return best;
  }

  double min_positive() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [k, v] : sparse) {
      const double l = lambda(static_cast<std::uint32_t>(k / K), static_cast<std::uint32_t>(k % K));
      if (l > 0.0) best = std::min(best, l);
    }
    if (w_prod > 0.0) {
      const double p = product_extreme(false, [&](std::uint64_t k) { return sparse.count(k) != 0; });
      if (std::isfinite(p)) best = std::min(best, w_prod * p);
    }
    return best;
  }
};

SparseJoining make_joining(const JoiningTarget& target, std::span<const std::uint32_t> labels,
                           std::uint32_t K) {
  require(!target.components.empty(), ErrorKind::InvalidArgument, "joining target is empty");
  SparseJoining J;
  J.N = labels.size();
  J.K = K;
  require(J.N >= 1, ErrorKind::InvalidArgument, "joining needs a nonempty index set");
  J.counts.assign(K, 0);
  for (auto a : labels) {
    require(a < K, ErrorKind::InvalidArgument, "label out of range");
    ++J.counts[a];
  }
  J.kappa.resize(K);
  for (std::uint32_t i = 0; i < K; ++i) J.kappa[i] = double(J.counts[i]) / double(J.N);
  const auto N = static_cast<std::int64_t>(J.N);
  for (const auto& c : target.components) {
    if (c.weight == 0.0) continue;
    switch (c.kind) {
      case JoiningTarget::Kind::Product:
        J.w_prod += c.weight;
        break;
      case JoiningTarget::Kind::Diagonal:
        for (std::uint32_t i = 0; i < K; ++i) {
          if (J.counts[i]) J.sparse[J.key(i, i)] += c.weight * J.kappa[i];
        }
        break;
      case JoiningTarget::Kind::ShiftedDiagonal: {
        const std::int64_t m = ((c.shift % N) + N) % N;
        std::unordered_map<std::uint64_t, std::uint64_t> pairs;
        for (std::int64_t n = 0; n < N; ++n) ++pairs[J.key(labels[n], labels[(n + m) % N])];
        for (const auto& [k, cnt] : pairs) J.sparse[k] += c.weight * double(cnt) / double(J.N);
        break;
      }
    }
  }
  return J;
}

struct Request {
  int phase;  // 1: (0,c) x (j,c'), 2: (a,c) x (0,c')
  std::uint32_t lvl;
  std::uint32_t c, c2;
  std::uint64_t count;
  std::vector<std::uint32_t> dom, ran;  // column ordinals within the class
};

/// Packs prefix intervals [0, e] and suffix intervals [s, h-1] into the
/// columns of one class; greedy by left endpoint is optimal for interval
/// graphs, so this succeeds whenever the per-level load fits.
void pack_class(std::uint32_t h, std::uint64_t columns,
                const std::vector<std::pair<Request*, std::uint32_t>>& prefixes,
                const std::vector<std::pair<Request*, std::uint32_t>>& suffixes, bool domain) {
  std::vector<std::int32_t> end(columns, -1);
  std::uint64_t next = 0;
  for (const auto& [req, e] : prefixes) {
    auto& out = domain ? req->dom : req->ran;
    for (std::uint64_t t = 0; t < req->count; ++t) {
      require(next < columns, ErrorKind::Internal, "column packing ran out of columns");
      end[next] = static_cast<std::int32_t>(e);
      out.push_back(static_cast<std::uint32_t>(next++));
    }
  }
  std::vector<std::vector<std::uint32_t>> bucket(h + 1);
  for (std::uint64_t k = 0; k < columns; ++k) bucket[end[k] + 1].push_back(static_cast<std::uint32_t>(k));
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> free;
  std::uint32_t pushed = 0;  // buckets 0..pushed-1 are in the heap
  for (const auto& [req, s] : suffixes) {
    while (pushed <= s) {  // prefix end e <= s - 1, bucket index e + 1 <= s
      for (auto k : bucket[pushed]) free.push(k);
      ++pushed;
    }
    auto& out = domain ? req->dom : req->ran;
    for (std::uint64_t t = 0; t < req->count; ++t) {
      require(!free.empty(), ErrorKind::Internal, "column packing found no free segment");
      out.push_back(free.top());
      free.pop();
    }
  }
}

struct Partition {
  std::uint32_t depth = 0;
  std::uint32_t classes = 0;
  std::vector<std::uint32_t> column_class;  // per column ordinal
  std::vector<std::uint32_t> labels;        // per local index; 0 = outside, else 1 + class*h + level
};

}  // namespace

CouplingSpec joining_spec(const JoiningTarget& target, std::span<const std::uint32_t> labels,
                          std::uint32_t K, double epsilon) {
  const SparseJoining J = make_joining(target, labels, K);
  CouplingSpec spec;
  spec.epsilon = epsilon;
  std::vector<std::uint32_t> present;
  for (std::uint32_t i = 0; i < K; ++i) {
    if (J.counts[i]) present.push_back(i);
  }
  require(present.size() == K, ErrorKind::InvalidArgument, "every label 0..K-1 must occur");
  spec.kappa = J.kappa;
  spec.lambda.resize(std::size_t(K) * K);
  for (std::uint32_t i = 0; i < K; ++i) {
    for (std::uint32_t j = 0; j < K; ++j) spec.lambda[std::size_t(i) * K + j] = J.lambda(i, j);
  }
  return spec;
}

DynamicPermutationResult build_dynamic_permutation(std::span<const std::uint32_t> q_labels,
                                                   const TowerAssignment& tower,
                                                   const JoiningTarget& target, double epsilon,
                                                   const DynamicPermutationOptions& options) {
  const std::uint64_t N = tower.size();
  require(q_labels.size() == N, ErrorKind::InvalidArgument,
          "Q labels (" + std::to_string(q_labels.size()) + ") and tower (" + std::to_string(N) +
              ") differ in length");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::InvalidArgument, "epsilon must be in (0, 1)");
  const std::uint32_t h = tower.h;
  const std::uint64_t b = tower.window_begin;
  const std::uint64_t Nw = tower.window_size();
  require(Nw >= 1, ErrorKind::InvalidTower, "tower window is empty");

  // local index w = n - b, 0-based
  std::uint64_t outside = 0;
  std::vector<std::uint32_t> starts;
  for (std::uint64_t w = 0; w < Nw; ++w) {
    const std::int32_t j = tower.level[b - 1 + w];
    if (j == TowerAssignment::kOutside) {
      ++outside;
    } else if (j == 0) {
      require(w + h <= Nw, ErrorKind::InvalidTower, "column runs past the tower window");
      for (std::uint32_t i = 1; i < h; ++i) {
        require(tower.level[b - 1 + w + i] == static_cast<std::int32_t>(i), ErrorKind::InvalidTower,
                "tower column is not a full ladder");
      }
      starts.push_back(static_cast<std::uint32_t>(w));
    }
  }
  const double out_frac = double(outside) / double(Nw);
  if (out_frac > epsilon) {
    std::ostringstream msg;
    msg << "tower leaves " << out_frac << " of the window outside, more than eps = " << epsilon;
    fail(ErrorKind::InvalidTower, msg.str());
  }

  // dense Q ids over the window
  std::vector<std::uint32_t> qvals(q_labels.begin() + (b - 1), q_labels.begin() + (b - 1 + Nw));
  std::vector<std::uint32_t> uniq = qvals;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const auto Kq = static_cast<std::uint32_t>(uniq.size());
  for (auto& q : qvals) q = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), q) - uniq.begin());

  auto make_partition = [&](std::uint32_t d) {
    Partition P;
    P.depth = d;
    std::map<std::vector<std::uint32_t>, std::uint32_t> names;
    std::vector<std::vector<std::uint32_t>> col_names(starts.size());
    for (std::size_t k = 0; k < starts.size(); ++k) {
      col_names[k].assign(qvals.begin() + starts[k], qvals.begin() + starts[k] + d);
      names.emplace(col_names[k], 0);
    }
    std::uint32_t id = 0;
    for (auto& [name, v] : names) v = id++;
    P.classes = id;
    P.column_class.resize(starts.size());
    P.labels.assign(Nw, 0);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const std::uint32_t c = names[col_names[k]];
      P.column_class[k] = c;
      for (std::uint32_t i = 0; i < h; ++i) P.labels[starts[k] + i] = 1 + c * h + i;
    }
    return P;
  };
  auto atom_count = [&](const Partition& P) { return 1 + P.classes * h; };

  auto feasible = [&](const Partition& P, std::string* why) {
    if (target.has_product() && double(atom_count(P)) * double(atom_count(P)) > 1e10) {
      if (why) *why = "N_large: too many atoms for a product component";
      return false;
    }
    const SparseJoining J = make_joining(target, P.labels, atom_count(P));
    try {
      for (std::uint32_t i = 0; i < J.K; ++i) {
        if (J.counts[i]) detail::check_approximation(J.kappa[i], J.counts[i], Nw, epsilon, std::to_string(i));
      }
      detail::check_n_large(J.min_positive(), Nw, epsilon);
    } catch (const Error& e) {
      if (why) *why = e.detail();
      return false;
    }
    return true;
  };

  Partition P;
  if (options.name_depth) {
    require(*options.name_depth <= h, ErrorKind::InvalidArgument, "name depth exceeds tower height");
    P = make_partition(*options.name_depth);
    std::string why;
    if (!feasible(P, &why)) fail(ErrorKind::InsufficientSample, why);
  } else {
    P = make_partition(0);
    std::string why;
    if (!feasible(P, &why)) fail(ErrorKind::InsufficientSample, why + " at name depth 0");
    for (std::uint32_t d = 1; d <= h; ++d) {
      Partition next = make_partition(d);
      if (!feasible(next, nullptr)) break;
      P = std::move(next);
    }
  }
  const std::uint32_t C = P.classes;
  const std::uint32_t K = atom_count(P);
  const SparseJoining J = make_joining(target, P.labels, K);
  auto atom = [&](std::uint32_t c, std::uint32_t lvl) { return 1 + c * h + lvl; };
  auto cell = [&](std::uint32_t i, std::uint32_t j) {
    return allocate_cell(J.kappa[i], J.counts[i], J.kappa[j], J.counts[j], J.lambda(i, j));
  };

  // Base cells of the S x S towers: (0,c) x (j,c') and (a,c) x (0,c'), a >= 1.
  std::vector<Request> requests;
  auto add = [&](std::uint32_t i, std::uint32_t j) {
    if (i == 0 || j == 0) return;
    const std::uint32_t ci = (i - 1) / h, li = (i - 1) % h;
    const std::uint32_t cj = (j - 1) / h, lj = (j - 1) % h;
    if (li != 0 && lj != 0) return;
    const std::uint64_t v = cell(i, j);
    if (v == 0) return;
    if (li == 0) {
      requests.push_back({1, lj, ci, cj, v, {}, {}});
    } else {
      requests.push_back({2, li, ci, cj, v, {}, {}});
    }
  };
  if (J.w_prod > 0.0) {
    for (std::uint32_t c = 0; c < C; ++c) {
      for (std::uint32_t c2 = 0; c2 < C; ++c2) {
        for (std::uint32_t l = 0; l < h; ++l) add(atom(c, 0), atom(c2, l));
        for (std::uint32_t l = 1; l < h; ++l) add(atom(c, l), atom(c2, 0));
      }
    }
  } else {
    for (const auto& [k, v] : J.sparse) add(static_cast<std::uint32_t>(k / K), static_cast<std::uint32_t>(k % K));
  }
  std::sort(requests.begin(), requests.end(), [](const Request& x, const Request& y) {
    return std::tie(x.phase, x.lvl, x.c, x.c2) < std::tie(y.phase, y.lvl, y.c, y.c2);
  });

  DynamicPermutationReport rep;
  rep.window_begin = b;
  rep.window_end = tower.window_end;
  rep.window_size = Nw;
  rep.h = h;
  rep.epsilon = epsilon;
  rep.name_depth = P.depth;
  rep.column_classes = C;
  rep.atoms = K - (J.counts[0] ? 0 : 1);
  rep.refines_q = P.depth == h;
  rep.outside_fraction = out_frac;

  // invariance of the allocation along S x S inside the tower
  auto check_pair = [&](std::uint32_t i, std::uint32_t j) {
    if (i == 0 || j == 0) return;
    const std::uint32_t li = (i - 1) % h, lj = (j - 1) % h;
    if (li + 1 >= h || lj + 1 >= h) return;
    if (cell(i, j) != cell(i + 1, j + 1)) ++rep.invariance_violations;
  };
  if (J.w_prod > 0.0) {
    for (std::uint32_t i = 1; i < K; ++i) {
      for (std::uint32_t j = 1; j < K; ++j) check_pair(i, j);
    }
  } else {
    for (const auto& [k, v] : J.sparse) check_pair(static_cast<std::uint32_t>(k / K), static_cast<std::uint32_t>(k % K));
  }
  require(rep.invariance_violations == 0, ErrorKind::Internal,
          "cell allocation is not invariant along the tower");

  // pack segments per class
  std::vector<std::vector<std::uint32_t>> class_columns(C);
  for (std::size_t k = 0; k < starts.size(); ++k) class_columns[P.column_class[k]].push_back(starts[k]);
  {
    std::vector<std::vector<std::pair<Request*, std::uint32_t>>> dom_pre(C), dom_suf(C), ran_pre(C), ran_suf(C);
    for (auto& r : requests) {
      if (r.phase == 1) {
        dom_pre[r.c].push_back({&r, h - 1 - r.lvl});
        ran_suf[r.c2].push_back({&r, r.lvl});
      }
    }
    for (auto& r : requests) {
      if (r.phase == 2) {
        dom_suf[r.c].push_back({&r, r.lvl});
        ran_pre[r.c2].push_back({&r, h - 1 - r.lvl});
      }
    }
    for (std::uint32_t c = 0; c < C; ++c) {
      pack_class(h, class_columns[c].size(), dom_pre[c], dom_suf[c], true);
      pack_class(h, class_columns[c].size(), ran_pre[c], ran_suf[c], false);
    }
  }

  std::vector<std::uint64_t> images(Nw, 0);  // local 1-based values
  std::vector<std::uint8_t> in_a(Nw, 0);
  detail::RangePool pool;
  pool.reset(Nw);
  auto put = [&](std::uint64_t from, std::uint64_t to) {
    require(images[from] == 0 && !pool.taken(to + 1), ErrorKind::Internal, "tower segments collide");
    images[from] = to + 1;
    in_a[from] = 1;
    pool.take(to + 1);
  };
  for (const auto& r : requests) {
    const auto& dcols = class_columns[r.c];
    const auto& rcols = class_columns[r.c2];
    for (std::size_t t = 0; t < r.count; ++t) {
      const std::uint64_t s = dcols[r.dom[t]];
      const std::uint64_t s2 = rcols[r.ran[t]];
      if (r.phase == 1) {
        for (std::uint32_t i = 0; i + r.lvl < h; ++i) put(s + i, s2 + r.lvl + i);
      } else {
        for (std::uint32_t i = 0; i + r.lvl < h; ++i) put(s + r.lvl + i, s2 + i);
      }
    }
  }
  rep.assigned = std::accumulate(in_a.begin(), in_a.end(), std::uint64_t{0});

  const auto top = static_cast<std::int32_t>(h) - 1;
  for (std::uint64_t w = 0; w + 1 < Nw; ++w) {
    if (!in_a[w]) continue;
    const std::int32_t l1 = tower.level[b - 1 + w];
    const std::int32_t l2 = tower.level[b - 1 + images[w] - 1];
    if (l1 < top && l2 < top && images[w + 1] != images[w] + 1) ++rep.ti_violations;
  }

  detail::continue_runs(images, 1, Nw, pool);

  for (std::uint64_t w = 0; w + 1 < Nw; ++w) rep.window_defects += images[w + 1] != images[w] + 1;
  rep.defect_fraction = double(rep.window_defects) / double(Nw);
  rep.defect_bound = 4.0 * epsilon + 2.0 / h + 2.0 / double(Nw);

  // Q-cell error against the same joining built on the Q labels
  {
    const SparseJoining Q = make_joining(target, qvals, Kq);
    std::unordered_map<std::uint64_t, std::uint64_t> emp;
    for (std::uint64_t w = 0; w < Nw; ++w) ++emp[Q.key(qvals[w], qvals[images[w] - 1])];
    double worst = 0.0;
    for (const auto& [k, cnt] : emp) {
      const double l = Q.lambda(static_cast<std::uint32_t>(k / Kq), static_cast<std::uint32_t>(k % Kq));
      worst = std::max(worst, std::fabs(double(cnt) / double(Nw) - l));
    }
    for (const auto& [k, v] : Q.sparse) {
      if (!emp.count(k)) {
        worst = std::max(worst, Q.lambda(static_cast<std::uint32_t>(k / Kq), static_cast<std::uint32_t>(k % Kq)));
      }
    }
    if (Q.w_prod > 0.0) {
      const double p = Q.product_extreme(true, [&](std::uint64_t k) { return emp.count(k) || Q.sparse.count(k); });
      if (p > 0.0) worst = std::max(worst, Q.w_prod * p);
    }
    rep.q_cell_error = worst;
    rep.q_cell_bound = 8.0 * epsilon;
  }

  std::vector<std::uint64_t> global(N);
  for (std::uint64_t n = 1; n <= N; ++n) global[n - 1] = n;
  for (std::uint64_t w = 0; w < Nw; ++w) global[b - 1 + w] = b - 1 + images[w];
  std::vector<std::uint8_t> matched(N, 0);
  std::copy(in_a.begin(), in_a.end(), matched.begin() + (b - 1));
  return {PermutationPlan(std::move(global)), rep, std::move(matched)};
}

}  // namespace fslab
