#pragma once

#include <string>
#include <vector>

#include "taxalign/error.hpp"
#include "taxalign/match.hpp"

namespace taxalign {

enum class Label { correct, partial, wrong };

struct AnnotationRecord {
    CategoryCode source;
    CategoryCode target;
    Label label = Label::wrong;
    std::string method;
};

// `source_code<TAB>target_code<TAB>label` with label in {true, partial, false}.
std::vector<AnnotationRecord> load_annotations(const std::string& path,
                                               const Scheme& source_scheme,
                                               const Scheme& target_scheme);

struct EvalReport {
    long correct = 0;
    long partial = 0;
    long wrong = 0;
    double accuracy = 0.0; // correct / total; partial counts against
    long n_annotated = 0;
    std::string method;
};

EvalReport accuracy(const std::vector<AnnotationRecord>& annotations);

struct TopnPolicy {
    enum class Kind { fraction, count } kind = Kind::fraction;
    double fraction = 0.05;
    long count = 0;
};

// Top ceil(fraction*n) or top `count` records by score. Re-sorts its input;
// stable under equal scores via code ordering.
struct TopnResult {
    std::vector<MatchRecord> records;
    bool short_input = false; // count policy asked for more than existed
};
TopnResult select_topn(std::vector<MatchRecord> matches,
                       const TopnPolicy& policy);

// Drop a method when accuracy over the first min(k, n) ranked annotations is
// below the threshold.
struct ScreenResult {
    bool dropped = false;
    double head_accuracy = 0.0;
    long window = 0;
};
ScreenResult screen_first_k(const std::vector<AnnotationRecord>& annotations,
                            long k = 50, double threshold = 0.01);

struct ContingencyTable {
    // [0][0]=A correct, [0][1]=A not; [1][0]=B correct, [1][1]=B not.
    long a = 0, b = 0, c = 0, d = 0;
};

// Builds the correct-vs-not table for two methods from their reports.
ContingencyTable method_comparison_table(const EvalReport& first,
                                         const EvalReport& second);

struct FisherResult {
    double p = 1.0;
    bool degenerate = false; // a zero margin; p = 1 by convention
};

// Two-sided Fisher's exact test via the point-probability rule: sum of
// hypergeometric probabilities of same-margin tables whose probability does
// not exceed the observed one (1e-12 relative slack).
FisherResult fisher_exact(const ContingencyTable& table);

std::string format_report(const EvalReport& report);

} // namespace taxalign
