// Blocks, polymers and the circle product: the combinatorial bookkeeping of
// the renormalisation-group coordinates, stripped of field dependence.
//
// A torus of side L^N is tiled at scale j by blocks of side L^j; a polymer is
// any union of same-scale blocks, held here as a bitmask over the block list.
// Polymer functionals are scalars per polymer, normalised to 1 at the empty
// polymer, and the circle product
//   (F o G)(X) = sum over sub-polymers Y of X of F(X \ Y) G(Y)
// is evaluated by exhaustive submask enumeration.  Two polymers touch when
// some pair of their blocks has sup-distance <= 1 in block units with torus
// wrap (diagonal contact counts); functionals built multiplicatively over
// touching-connected components factorize exactly over non-touching unions,
// and factorization_check measures the defect for anything else.
//
// Everything is exact integer and table arithmetic, sized for exhaustive
// verification: the mask holds at most 32 blocks and the circle product
// enumerates at most 2^24 submasks.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "lattice.hpp"
#include "quadrature.hpp"

namespace phi4rg {

struct Block {
  int j = 0;                // scale
  std::vector<int> corner;  // lattice coordinates, multiples of L^j
};

namespace detail {

inline long long ipow(int b, int e) {
  long long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

// Blocks at scale j in row-major order over the block grid (axis 0 slowest).
inline std::vector<Block> blocks_at(const TorusSpec& t, int j) {
  validate(t);
  if (j < 0 || j > t.N) throw std::domain_error("blocks_at: scale outside 0..N");
  int grid = static_cast<int>(ipow(t.L, t.N - j));  // blocks per axis
  long long count = 1;
  for (int k = 0; k < t.d; ++k) count *= grid;
  if (count > (1 << 24)) throw std::length_error("blocks_at: too many blocks");
  int sidelen = static_cast<int>(ipow(t.L, j));
  std::vector<Block> out(static_cast<std::size_t>(count));
  std::vector<int> c(static_cast<std::size_t>(t.d), 0);
  for (long long i = 0; i < count; ++i) {
    Block& b = out[static_cast<std::size_t>(i)];
    b.j = j;
    b.corner.resize(static_cast<std::size_t>(t.d));
    for (int k = 0; k < t.d; ++k) b.corner[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)] * sidelen;
    for (int k = t.d - 1; k >= 0; --k) {
      if (++c[static_cast<std::size_t>(k)] < grid) break;
      c[static_cast<std::size_t>(k)] = 0;
    }
  }
  return out;
}

}  // namespace detail

struct Nesting {
  std::vector<Block> fine;    // scale j
  std::vector<Block> coarse;  // scale j+1
  std::vector<int> parent;    // parent[i]: index into coarse containing fine[i]
};

inline Nesting blocks_and_nesting(const TorusSpec& t, int j) {
  validate(t);
  if (j < 0 || j >= t.N) throw std::domain_error("blocks_and_nesting: need 0 <= j < N");
  Nesting nest;
  nest.fine = detail::blocks_at(t, j);
  nest.coarse = detail::blocks_at(t, j + 1);
  int gridc = static_cast<int>(detail::ipow(t.L, t.N - j - 1));
  int sidec = static_cast<int>(detail::ipow(t.L, j + 1));
  nest.parent.reserve(nest.fine.size());
  for (const Block& b : nest.fine) {
    // Parent index from the coarse block-grid coordinates, row-major.
    long long idx = 0;
    for (int k = 0; k < t.d; ++k)
      idx = idx * gridc + b.corner[static_cast<std::size_t>(k)] / sidec;
    nest.parent.push_back(static_cast<int>(idx));
  }
  return nest;
}

struct Polymer {
  int j = 0;
  std::uint32_t mask = 0;  // bit i: block i of the scale-j list is included
};

// One scale of one torus with its adjacency tables; every polymer operation
// below interprets masks relative to a space.
struct PolymerSpace {
  TorusSpec torus;
  int j = 0;
  std::vector<Block> blocks;
  std::vector<std::uint32_t> touch;  // per block: itself plus sup-distance-1 neighbours

  int size() const { return static_cast<int>(blocks.size()); }
  std::uint32_t full() const {
    return blocks.size() == 32 ? 0xffffffffu : (1u << blocks.size()) - 1u;
  }
  // The polymer and its touching halo, the kernel of every contact question.
  std::uint32_t expand(std::uint32_t mask) const {
    std::uint32_t e = 0;
    for (int b = 0; mask != 0; ++b, mask >>= 1)
      if (mask & 1u) e |= touch[static_cast<std::size_t>(b)];
    return e;
  }
};

inline PolymerSpace polymer_space(const TorusSpec& t, int j) {
  PolymerSpace sp;
  sp.torus = t;
  sp.j = j;
  sp.blocks = detail::blocks_at(t, j);
  if (sp.blocks.size() > 32)
    throw std::length_error("polymer_space: more than 32 blocks");
  int grid = static_cast<int>(detail::ipow(t.L, t.N - j));
  int sidelen = static_cast<int>(detail::ipow(t.L, j));
  std::size_t nb = sp.blocks.size();
  sp.touch.assign(nb, 0);
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      bool near = true;
      for (int k = 0; k < t.d; ++k) {
        int da = sp.blocks[a].corner[static_cast<std::size_t>(k)] / sidelen;
        int db = sp.blocks[b].corner[static_cast<std::size_t>(k)] / sidelen;
        int diff = std::abs(da - db);
        diff = std::min(diff, grid - diff);  // torus wrap
        if (diff > 1) { near = false; break; }
      }
      if (near) sp.touch[a] |= (1u << b);
    }
  }
  return sp;
}

inline Polymer make_polymer(const PolymerSpace& sp, std::uint32_t mask) {
  if (sp.size() < 32 && (mask & ~sp.full()) != 0)
    throw std::invalid_argument("make_polymer: mask names blocks outside the space");
  return Polymer{sp.j, mask};
}

inline bool touching(const PolymerSpace& sp, const Polymer& X, const Polymer& Y) {
  if (X.j != sp.j || Y.j != sp.j)
    throw std::domain_error("touching: scale mismatch");
  return (sp.expand(X.mask) & Y.mask) != 0;
}

struct PolymerFunctional {
  std::function<double(std::uint32_t)> f;
  double operator()(std::uint32_t mask) const { return f(mask); }
  double operator()(const Polymer& X) const { return f(X.mask); }
  bool normalised() const { return f(0) == 1.0; }
};

// The two-sided identity of the circle product.
inline PolymerFunctional unit_functional() {
  return {[](std::uint32_t m) { return m == 0 ? 1.0 : 0.0; }};
}

inline PolymerFunctional from_table(std::vector<double> table) {
  auto t = std::make_shared<std::vector<double>>(std::move(table));
  return {[t](std::uint32_t m) {
    if (m >= t->size()) throw std::out_of_range("PolymerFunctional: mask outside table");
    return (*t)[m];
  }};
}

// F(X) = prod over blocks of X of the per-block value; F(empty) = 1.
inline PolymerFunctional multiplicative_functional(std::vector<double> per_block) {
  auto v = std::make_shared<std::vector<double>>(std::move(per_block));
  return {[v](std::uint32_t m) {
    double prod = 1.0;
    for (std::size_t b = 0; m != 0; ++b, m >>= 1)
      if (m & 1u) prod *= (*v)[b];
    return prod;
  }};
}

// Touching-connected components of a polymer, each as a mask.
inline std::vector<std::uint32_t> components(const PolymerSpace& sp, std::uint32_t mask) {
  std::vector<std::uint32_t> out;
  while (mask != 0) {
    std::uint32_t comp = mask & (~mask + 1u);  // lowest set bit seeds the sweep
    for (;;) {
      std::uint32_t grown = sp.expand(comp) & mask;
      if (grown == comp) break;
      comp = grown;
    }
    out.push_back(comp);
    mask &= ~comp;
  }
  return out;
}

// K(X) = prod over touching-connected components of a per-component value;
// factorizes over non-touching unions by construction.
inline PolymerFunctional component_functional(const PolymerSpace& sp,
                                              std::function<double(std::uint32_t)> per_component) {
  auto spc = std::make_shared<PolymerSpace>(sp);
  return {[spc, per_component](std::uint32_t m) {
    double prod = 1.0;
    for (std::uint32_t c : components(*spc, m)) prod *= per_component(c);
    return prod;
  }};
}

inline double circle_product(const PolymerFunctional& F, const PolymerFunctional& G,
                             const Polymer& X) {
  int nb = 0;
  for (std::uint32_t m = X.mask; m != 0; m >>= 1) nb += static_cast<int>(m & 1u);
  if (nb > 24) throw std::length_error("circle_product: polymer larger than 24 blocks");
  Neumaier acc;
  for (std::uint32_t Y = X.mask;; Y = (Y - 1) & X.mask) {
    acc.add(F(X.mask ^ Y) * G(Y));
    if (Y == 0) break;
  }
  return acc.value();
}

inline double factorization_check(const PolymerSpace& sp, const PolymerFunctional& K,
                                  const Polymer& X, const Polymer& Y) {
  if (touching(sp, X, Y))
    throw std::invalid_argument("factorization_check: polymers touch");
  return std::abs(K(X.mask | Y.mask) - K(X.mask) * K(Y.mask));
}

}  // namespace phi4rg
