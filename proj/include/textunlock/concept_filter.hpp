#pragma once

// Removes concepts that would leak the class vocabulary into the concept
// bottleneck: class names, the words that make up class names, and
// per-class exclusion terms (parents, synonyms, related species) supplied as
// a tab-separated file.
//
// All matching is exact string equality after lowercasing and trimming.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "textunlock/cbm.hpp"
#include "textunlock/error.hpp"
#include "textunlock/io.hpp"

namespace textunlock {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::string normalize_term(std::string_view s) { return to_lower(trim(s)); }

/// Lowercased tokens of a class name, split on whitespace, hyphens and commas.
inline std::vector<std::string> constituent_words(std::string_view class_name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(to_lower(std::move(cur)));
    cur.clear();
  };
  for (char c : class_name) {
    if (c == '-' || c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

/// Class name -> excluded terms.
using ExclusionMap = std::map<std::string, std::vector<std::string>>;

/// Parses `class_name<TAB>term1,term2,...` lines. Blank lines are skipped.
inline ExclusionMap parse_exclusions(const std::vector<std::string>& lines) {
  ExclusionMap out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto tab = lines[i].find('\t');
    require(tab != std::string::npos, ErrorKind::invalid_argument,
            "exclusions: line " + std::to_string(i + 1) + " has no tab separator");
    auto& terms = out[normalize_term(std::string_view(lines[i]).substr(0, tab))];
    std::string_view rest = std::string_view(lines[i]).substr(tab + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      auto term = normalize_term(rest.substr(0, comma));
      if (!term.empty()) terms.push_back(std::move(term));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return out;
}

inline ExclusionMap read_exclusions(const io::fs::path& path) { return parse_exclusions(io::read_lines(path)); }

enum class FilterReason { exact_class_match, constituent_word, exclusion_term };

constexpr std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::exact_class_match: return "exact-class-match";
    case FilterReason::constituent_word: return "constituent-word";
    case FilterReason::exclusion_term: return "exclusion-term";
  }
  return "unknown";
}

struct RemovedConcept {
  std::string name;
  FilterReason reason;
};

struct FilterReport {
  std::vector<RemovedConcept> removed;  // in input order
  std::size_t input_count = 0;
  std::size_t kept_count = 0;
  std::size_t removed_count() const { return removed.size(); }
};

struct FilterResult {
  ConceptSet concepts;
  FilterReport report;
};

/// Keeps concepts (in order, rows copied bit-exactly) that match none of:
/// a class name or one of its comma-separated synonyms, a constituent word
/// of a class name, or an exclusion term of any class.
inline FilterResult filter_concepts(const ConceptSet& concepts, const std::vector<std::string>& class_names,
                                    const ExclusionMap& exclusions) {
  std::set<std::string> exact, words, excluded;
  for (const auto& name : class_names) {
    exact.insert(normalize_term(name));
    std::string_view rest = name;
    while (true) {
      const auto comma = rest.find(',');
      if (auto syn = normalize_term(rest.substr(0, comma)); !syn.empty()) exact.insert(std::move(syn));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    for (auto& w : constituent_words(name)) words.insert(std::move(w));
  }
  for (const auto& [cls, terms] : exclusions)
    for (const auto& t : terms) excluded.insert(normalize_term(t));

  FilterResult out;
  out.report.input_count = concepts.size();
  out.concepts.provenance = concepts.provenance;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const auto key = normalize_term(concepts.names[i]);
    if (exact.count(key)) {
      out.report.removed.push_back({concepts.names[i], FilterReason::exact_class_match});
    } else if (words.count(key)) {
      out.report.removed.push_back({concepts.names[i], FilterReason::constituent_word});
    } else if (excluded.count(key)) {
      out.report.removed.push_back({concepts.names[i], FilterReason::exclusion_term});
    } else {
      keep.push_back(i);
      out.concepts.names.push_back(concepts.names[i]);
    }
  }
  require(!keep.empty(), ErrorKind::empty_concept_set,
          "filter: every one of the " + std::to_string(concepts.size()) + " concepts was removed");
  out.concepts.C = gather_rows(concepts.C, keep);
  out.report.kept_count = keep.size();
  return out;
}

}  // namespace textunlock
