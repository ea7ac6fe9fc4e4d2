#include "taxalign/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace taxalign {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool all_digits(const std::string& s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

CategoryCode parse_code(const std::string& raw, const Scheme& scheme) {
    std::string text = trim(raw);
    if (text.empty()) throw DataError("empty category code");

    CategoryCode code;
    code.scheme = scheme.id;
    code.raw = text;

    std::size_t start = 0;
    int position = 1;
    while (true) {
        std::size_t sep = text.find(scheme.separator, start);
        std::string segment = sep == std::string::npos
                                  ? text.substr(start)
                                  : text.substr(start, sep - start);
        if (!all_digits(segment)) {
            throw DataError("code '" + text + "': segment " +
                            std::to_string(position) + " is not numeric");
        }
        code.segments.push_back(segment);
        if (sep == std::string::npos) break;
        start = sep + 1;
        ++position;
    }

    if (scheme.max_levels > 0 && code.level() > scheme.max_levels) {
        throw DataError("code '" + text + "': " +
                        std::to_string(code.level()) + " segments exceed scheme '" +
                        scheme.id + "' depth " + std::to_string(scheme.max_levels));
    }
    return code;
}

bool is_ancestor(const CategoryCode& a, const CategoryCode& b) {
    if (a.scheme != b.scheme) {
        throw DataError("scheme mismatch: '" + a.scheme + "' vs '" + b.scheme + "'");
    }
    if (a.segments.size() >= b.segments.size()) return false;
    return std::equal(a.segments.begin(), a.segments.end(), b.segments.begin());
}

Taxonomy::Taxonomy(Scheme scheme, std::vector<Category> categories,
                   OrphanPolicy policy)
    : scheme_(std::move(scheme)) {
    for (auto& cat : categories) {
        auto [it, inserted] = categories_.emplace(cat.code.segments, cat);
        if (!inserted) {
            throw DataError("duplicate code '" + cat.code.raw + "'");
        }
    }
    for (auto& [segments, cat] : categories_) {
        max_depth_ = std::max(max_depth_, cat.code.level());
        order_.push_back(cat.code);
        // Parent is the longest strict prefix present in the taxonomy.
        cat.parent.reset();
        for (std::size_t len = segments.size() - 1; len >= 1; --len) {
            std::vector<std::string> prefix(segments.begin(),
                                            segments.begin() + len);
            auto it = categories_.find(prefix);
            if (it != categories_.end()) {
                if (policy == OrphanPolicy::strict &&
                    len != segments.size() - 1) {
                    throw DataError("code '" + cat.code.raw +
                                    "': missing immediate ancestor");
                }
                cat.parent = it->second.code;
                break;
            }
        }
        if (!cat.parent && cat.code.level() > 1 &&
            policy == OrphanPolicy::strict) {
            throw DataError("code '" + cat.code.raw + "': missing ancestor");
        }
        if (cat.parent) {
            children_[cat.parent->segments].push_back(cat.code);
        }
    }
}

const Category& Taxonomy::at(const CategoryCode& code) const {
    auto it = categories_.find(code.segments);
    if (it == categories_.end()) {
        throw DataError("unknown code '" + code.raw + "'");
    }
    return it->second;
}

bool Taxonomy::contains(const CategoryCode& code) const {
    return categories_.count(code.segments) > 0;
}

const std::vector<CategoryCode>& Taxonomy::children(
    const CategoryCode& code) const {
    static const std::vector<CategoryCode> kEmpty;
    auto it = children_.find(code.segments);
    return it == children_.end() ? kEmpty : it->second;
}

std::vector<CategoryCode> Taxonomy::level_slice(int level) const {
    if (level < 1 || level > max_depth_) {
        throw DataError("level " + std::to_string(level) +
                        " out of range [1, " + std::to_string(max_depth_) + "]");
    }
    std::vector<CategoryCode> out;
    for (const auto& code : order_) {
        if (code.level() == level) out.push_back(code);
    }
    return out;
}

std::vector<CategoryCode> Taxonomy::descendants_at_level(
    const CategoryCode& root, int level) const {
    std::vector<CategoryCode> out;
    if (root.level() == level) {
        if (contains(root)) out.push_back(root);
        return out;
    }
    if (root.level() > level) return out;
    for (const auto& child : children(root)) {
        auto sub = descendants_at_level(child, level);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

Taxonomy load_taxonomy(const std::string& path, const Scheme& scheme,
                       const TaxonomyFormat& format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open taxonomy file '" + path + "'");

    std::vector<Category> categories;
    std::string line;
    long line_no = 0;
    bool header_pending = format.header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::size_t delim = line.find(format.delimiter);
        if (delim == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected '" + std::string(1, format.delimiter) +
                            "'-delimited code and description");
        }
        Category cat;
        try {
            cat.code = parse_code(line.substr(0, delim), scheme);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " +
                            e.what());
        }
        cat.description = trim(line.substr(delim + 1));
        categories.push_back(std::move(cat));
    }
    return Taxonomy(scheme, std::move(categories), format.orphan_policy);
}

void save_taxonomy(const Taxonomy& taxonomy, const std::string& path,
                   char delimiter) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const auto& code : taxonomy.codes()) {
        out << code.raw << delimiter << taxonomy.at(code).description << '\n';
    }
}

Taxonomy apply_translations(const Taxonomy& taxonomy, const std::string& path,
                            char delimiter) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open translations file '" + path + "'");

    std::map<std::vector<std::string>, std::string> translations;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::size_t delim = line.find(delimiter);
        if (delim == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected code and translation");
        }
        auto code = parse_code(line.substr(0, delim), taxonomy.scheme());
        translations[code.segments] = trim(line.substr(delim + 1));
    }

    std::vector<Category> categories;
    for (const auto& code : taxonomy.codes()) {
        Category cat = taxonomy.at(code);
        auto it = translations.find(code.segments);
        if (it != translations.end()) cat.description = it->second;
        categories.push_back(std::move(cat));
    }
    return Taxonomy(taxonomy.scheme(), std::move(categories));
}

} // namespace taxalign
