#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "diffusion.hpp"
#include "elements.hpp"

namespace xtal {

struct TemplateEntry {
  std::vector<int> signature;  // canonical composition ratio signature
  Crystal crystal;             // annotated and symmetry-verified at load
  std::string source;          // provenance label, e.g. the file name
};

struct RetrievalHit {
  int index = 0;           // entry index in dataset order
  double similarity = 0.0; // 1 / (1 + mean descriptor assignment distance)
};

// Template store for the retrieval/substitution pipeline. Entries keep their
// dataset order, which is the deterministic tie-break for ranking.
class TemplateIndex {
public:
  // Reads every *.json crystal under dir (sorted by name), annotates it
  // against the group table, and rejects entries failing verify_symmetry.
  static TemplateIndex build(const std::string& dir,
                             const ElementTable& elements,
                             const SpaceGroupTable& groups);
  static TemplateIndex from_crystals(
      std::vector<std::pair<std::string, Crystal>> named,
      const ElementTable& elements, const SpaceGroupTable& groups);

  int size() const { return static_cast<int>(entries_.size()); }
  const TemplateEntry& entry(int i) const;
  const ElementTable& elements() const { return *elements_; }

  // Entries sharing the query's ratio signature, best similarity first.
  std::vector<RetrievalHit> retrieve(const std::map<int, int>& query) const;

  // The indexed template with its elements relabeled onto the query
  // composition (minimum-cost descriptor assignment per equal-ratio class).
  Crystal substitute(const std::map<int, int>& query, int index) const;

private:
  const ElementTable* elements_ = nullptr;
  std::vector<TemplateEntry> entries_;
};

// Optimal element relabeling of an annotated template onto a query
// composition with the same ratio signature.
Crystal substitute_composition(const Crystal& tmpl,
                               const std::map<int, int>& query,
                               const ElementTable& elements);

// Forward-noises the template's lattice coefficients and coordinates to
// t_start, then reverse-samples to 0 with the species pinned. t_start = 0
// returns the template unchanged.
Crystal refine(const Crystal& tmpl, DenoiserBase& denoiser,
               const NoiseSchedule& sched, const SpaceGroupTable& groups,
               int h, int t_start, Rng& rng, SampleTrace* trace = nullptr);

}  // namespace xtal
