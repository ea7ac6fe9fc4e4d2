#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "taxalign/error.hpp"

namespace taxalign {

// How codes of a classification scheme are written.
//   separator   character between code segments ('.' for OKPD2-style dotted
//               codes, '-' for NIGP-style class-item codes)
//   max_levels  0 = unlimited; otherwise parsing rejects deeper codes
struct Scheme {
    std::string id;
    char separator = '.';
    int max_levels = 0;

    static Scheme dotted(std::string id = "dotted", int max_levels = 0) {
        return Scheme{std::move(id), '.', max_levels};
    }
    static Scheme class_item(std::string id = "class-item", int max_levels = 0) {
        return Scheme{std::move(id), '-', max_levels};
    }
};

struct CategoryCode {
    std::string scheme;
    std::vector<std::string> segments;
    std::string raw;

    int level() const { return static_cast<int>(segments.size()); }

    bool operator==(const CategoryCode& other) const {
        return scheme == other.scheme && segments == other.segments;
    }
    bool operator<(const CategoryCode& other) const {
        return segments < other.segments;
    }
};

// True iff a's segments are a strict prefix of b's. Throws on scheme mismatch.
bool is_ancestor(const CategoryCode& a, const CategoryCode& b);

CategoryCode parse_code(const std::string& raw, const Scheme& scheme);

struct Category {
    CategoryCode code;
    std::string description;
    std::optional<CategoryCode> parent;
};

enum class OrphanPolicy {
    // Attach to the nearest existing ancestor; root if none exists.
    nearest_ancestor,
    // Every non-root code must have an in-taxonomy ancestor.
    strict,
};

struct TaxonomyFormat {
    char delimiter = '\t';
    bool header = false;
    OrphanPolicy orphan_policy = OrphanPolicy::nearest_ancestor;
};

class Taxonomy {
public:
    Taxonomy(Scheme scheme, std::vector<Category> categories,
             OrphanPolicy policy = OrphanPolicy::nearest_ancestor);

    const Scheme& scheme() const { return scheme_; }
    int max_depth() const { return max_depth_; }
    std::size_t size() const { return order_.size(); }

    // Categories in code order.
    const std::vector<CategoryCode>& codes() const { return order_; }
    const Category& at(const CategoryCode& code) const;
    bool contains(const CategoryCode& code) const;
    const std::vector<CategoryCode>& children(const CategoryCode& code) const;

    // All categories with exactly `level` segments, in code order.
    std::vector<CategoryCode> level_slice(int level) const;

    // Codes in the subtree below `root` that sit exactly at `level`.
    // `root` itself is included when its level matches.
    std::vector<CategoryCode> descendants_at_level(const CategoryCode& root,
                                                   int level) const;

private:
    Scheme scheme_;
    std::map<std::vector<std::string>, Category> categories_;
    std::map<std::vector<std::string>, std::vector<CategoryCode>> children_;
    std::vector<CategoryCode> order_;
    int max_depth_ = 0;
};

// Reads `code<delim>description` lines; '#' lines are comments.
Taxonomy load_taxonomy(const std::string& path, const Scheme& scheme,
                       const TaxonomyFormat& format = {});

// Writes the taxonomy back out in the same format.
void save_taxonomy(const Taxonomy& taxonomy, const std::string& path,
                   char delimiter = '\t');

// Replaces descriptions with ones from a `code<delim>translation` file.
// Codes absent from the file keep their original description.
Taxonomy apply_translations(const Taxonomy& taxonomy, const std::string& path,
                            char delimiter = '\t');

} // namespace taxalign
