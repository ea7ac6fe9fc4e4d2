#include "taxalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace taxalign {

std::vector<AnnotationRecord> load_annotations(const std::string& path,
                                               const Scheme& source_scheme,
                                               const Scheme& target_scheme) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file '" + path + "'");
    std::vector<AnnotationRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string source, target, label, method;
        std::getline(ss, source, '\t');
        std::getline(ss, target, '\t');
        std::getline(ss, label, '\t');
        std::getline(ss, method, '\t');
        AnnotationRecord record;
        record.source = parse_code(source, source_scheme);
        record.target = parse_code(target, target_scheme);
        if (label == "true") {
            record.label = Label::correct;
        } else if (label == "partial") {
            record.label = Label::partial;
        } else if (label == "false") {
            record.label = Label::wrong;
        } else {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": label must be true, partial or false, got '" +
                            label + "'");
        }
        record.method = method;
        records.push_back(std::move(record));
    }
    return records;
}

EvalReport accuracy(const std::vector<AnnotationRecord>& annotations) {
    if (annotations.empty()) throw DataError("accuracy: empty annotation list");
    EvalReport report;
    for (const auto& record : annotations) {
        switch (record.label) {
        case Label::correct: ++report.correct; break;
        case Label::partial: ++report.partial; break;
        case Label::wrong: ++report.wrong; break;
        }
        if (report.method.empty()) report.method = record.method;
    }
    report.n_annotated = report.correct + report.partial + report.wrong;
    report.accuracy =
        static_cast<double>(report.correct) / report.n_annotated;
    return report;
}

TopnResult select_topn(std::vector<MatchRecord> matches,
                       const TopnPolicy& policy) {
    if (matches.empty()) throw DataError("select_topn: empty match list");
    std::sort(matches.begin(), matches.end(),
              [](const MatchRecord& a, const MatchRecord& b) {
                  if (a.score != b.score) return a.score > b.score;
                  if (!(a.source == b.source)) return a.source < b.source;
                  return a.target < b.target;
              });

    long take = 0;
    TopnResult result;
    if (policy.kind == TopnPolicy::Kind::fraction) {
        if (policy.fraction <= 0.0 || policy.fraction > 1.0) {
            throw ConfigError("select_topn: fraction must be in (0, 1]");
        }
        take = static_cast<long>(
            std::ceil(policy.fraction * static_cast<double>(matches.size())));
    } else {
        if (policy.count <= 0) {
            throw ConfigError("select_topn: count must be positive");
        }
        take = policy.count;
        if (take > static_cast<long>(matches.size())) result.short_input = true;
    }
    take = std::min<long>(take, static_cast<long>(matches.size()));
    matches.resize(static_cast<std::size_t>(take));
    result.records = std::move(matches);
    return result;
}

ScreenResult screen_first_k(const std::vector<AnnotationRecord>& annotations,
                            long k, double threshold) {
    if (annotations.empty()) {
        throw DataError("screen_first_k: empty annotation list");
    }
    ScreenResult result;
    result.window = std::min<long>(k, static_cast<long>(annotations.size()));
    long correct = 0;
    for (long i = 0; i < result.window; ++i) {
        if (annotations[static_cast<std::size_t>(i)].label == Label::correct) {
            ++correct;
        }
    }
    result.head_accuracy = static_cast<double>(correct) / result.window;
    result.dropped = result.head_accuracy < threshold;
    return result;
}

ContingencyTable method_comparison_table(const EvalReport& first,
                                         const EvalReport& second) {
    // Partial counts as not-correct, matching the accuracy convention.
    ContingencyTable table;
    table.a = first.correct;
    table.b = first.partial + first.wrong;
    table.c = second.correct;
    table.d = second.partial + second.wrong;
    return table;
}

FisherResult fisher_exact(const ContingencyTable& table) {
    const long a = table.a, b = table.b, c = table.c, d = table.d;
    if (a < 0 || b < 0 || c < 0 || d < 0) {
        throw DataError("fisher_exact: negative count");
    }
    const long n = a + b + c + d;
    if (n == 0) throw DataError("fisher_exact: empty table");

    FisherResult result;
    const long row1 = a + b, row2 = c + d, col1 = a + c, col2 = b + d;
    if (row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0) {
        result.p = 1.0;
        result.degenerate = true;
        return result;
    }

    // log n! by cumulative summation, accumulated in long double.
    std::vector<long double> log_fact(static_cast<std::size_t>(n) + 1, 0.0L);
    for (long i = 2; i <= n; ++i) {
        log_fact[static_cast<std::size_t>(i)] =
            log_fact[static_cast<std::size_t>(i - 1)] +
            std::log(static_cast<long double>(i));
    }
    auto log_prob = [&](long k) {
        // P(A = k | margins) with k in the hypergeometric support.
        long bk = row1 - k, ck = col1 - k, dk = row2 - ck;
        return log_fact[row1] + log_fact[row2] + log_fact[col1] +
               log_fact[col2] - log_fact[n] - log_fact[k] - log_fact[bk] -
               log_fact[ck] - log_fact[dk];
    };

    const long k_min = std::max(0L, col1 - row2);
    const long k_max = std::min(row1, col1);
    const long double observed = log_prob(a);
    const long double slack = std::log(1.0L + 1e-12L);

    long double p = 0.0L;
    for (long k = k_min; k <= k_max; ++k) {
        long double lp = log_prob(k);
        if (lp <= observed + slack) p += std::exp(lp);
    }
    result.p = static_cast<double>(std::min(p, 1.0L));
    return result;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << "method: " << (report.method.empty() ? "-" : report.method) << '\n'
        << "correct: " << report.correct << '\n'
        << "partial: " << report.partial << '\n'
        << "wrong: " << report.wrong << '\n'
        << "n_annotated: " << report.n_annotated << '\n';
    out.precision(1);
    out << std::fixed << "accuracy_percent: " << report.accuracy * 100.0
        << '\n';
    return out.str();
}

} // namespace taxalign
