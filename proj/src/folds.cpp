#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include "textutil.hpp"
#include "zeroleaf/harness.hpp"

namespace zeroleaf {

namespace {

constexpr std::string_view kFoldHeader = "zeroleaf-folds v1";

// Uniform integer in [0, bound) by rejection; portable, unlike
// std::uniform_int_distribution whose algorithm is unspecified.
std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::vector<std::size_t> FoldPlan::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (folds[i] == fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  const auto n = manifest.size();
  if (k < 2 || static_cast<std::size_t>(k) > n)
    throw Error(Errc::InvalidK, "k = " + std::to_string(k) + " with " + std::to_string(n) + " items");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(n, -1);
  for (const auto& e : manifest.entries) plan.item_ids.push_back(e.item_id);

  std::uint64_t next_fold = 0;
  for (int c = 0; c < manifest.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (manifest.entries[i].true_label == c) members.push_back(i);
    if (members.empty()) {
      plan.warnings.push_back("class '" + manifest.class_names[c] + "' has no items");
      continue;
    }
    if (members.size() < static_cast<std::size_t>(k))
      plan.warnings.push_back("class '" + manifest.class_names[c] + "' has " + std::to_string(members.size()) +
                              " items, fewer than k = " + std::to_string(k));

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 gen(seq);
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[uniform_below(gen, i)]);

    for (std::size_t i = 0; i < members.size(); ++i)
      plan.folds[members[i]] = static_cast<int>((next_fold + i) % static_cast<std::uint64_t>(k));
    next_fold = (next_fold + members.size()) % static_cast<std::uint64_t>(k);
  }
  return plan;
}

std::string format_fold_plan(const FoldPlan& plan) {
  std::string out(kFoldHeader);
  out += "\nk\t" + std::to_string(plan.k) + "\nseed\t" + std::to_string(plan.seed) + "\n";
  for (std::size_t i = 0; i < plan.item_ids.size(); ++i)
    out += plan.item_ids[i] + "\t" + std::to_string(plan.folds[i]) + "\n";
  return out;
}

FoldPlan parse_fold_plan(std::string_view text, const DatasetManifest& manifest) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!text::trim(line).empty() && line.front() != '#') return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) {
    return Error(Errc::ParseError, "fold plan line " + std::to_string(line_no) + ": " + what);
  };

  if (!next() || text::trim(line) != kFoldHeader) throw fail("expected header");
  FoldPlan plan;
  if (!next()) throw fail("missing k");
  auto f = text::split_tabs(line);
  std::optional<int> k;
  if (f.size() != 2 || f[0] != "k" || !(k = text::parse_int(f[1]))) throw fail("expected 'k<TAB>n'");
  if (*k < 2) throw Error(Errc::InvalidK, "k = " + f[1]);
  plan.k = *k;
  if (!next()) throw fail("missing seed");
  f = text::split_tabs(line);
  std::optional<std::uint64_t> seed;
  if (f.size() != 2 || f[0] != "seed" || !(seed = text::parse_u64(f[1]))) throw fail("expected 'seed<TAB>n'");
  plan.seed = *seed;

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest.entries[i].item_id, i);
  plan.item_ids.resize(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) plan.item_ids[i] = manifest.entries[i].item_id;
  plan.folds.assign(manifest.size(), -1);

  std::vector<std::string> extra;
  while (next()) {
    f = text::split_tabs(line);
    std::optional<int> fold;
    if (f.size() != 2 || !(fold = text::parse_int(f[1])) || *fold < 0 || *fold >= plan.k)
      throw fail("expected 'item<TAB>fold' with fold in [0, k)");
    const auto it = index.find(f[0]);
    if (it == index.end()) {
      extra.push_back(f[0]);
      continue;
    }
    if (plan.folds[it->second] != -1) throw Error(Errc::DuplicateItemId, f[0]);
    plan.folds[it->second] = *fold;
  }
  if (!extra.empty()) {
    std::string ids;
    for (const auto& id : extra) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(Errc::ExtraRows, "fold plan ids not in manifest: " + ids);
  }
  std::string missing;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (plan.folds[i] == -1) missing += (missing.empty() ? "" : ", ") + plan.item_ids[i];
  if (!missing.empty()) throw Error(Errc::MissingRows, "fold plan lacks: " + missing);
  return plan;
}

}  // namespace zeroleaf
