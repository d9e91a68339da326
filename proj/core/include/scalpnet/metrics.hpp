#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scalpnet {

// K x K counts: rows = actual class, columns = predicted class.
struct ConfusionMatrix {
    int k = 0;
    std::vector<uint64_t> counts;  // k*k, row-major
    std::vector<std::string> class_names;

    uint64_t at(int actual, int predicted) const {
        return counts[static_cast<size_t>(actual) * k + predicted];
    }
    uint64_t& at(int actual, int predicted) {
        return counts[static_cast<size_t>(actual) * k + predicted];
    }
    uint64_t total() const;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    ConfusionMatrix matrix;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
};

ConfusionMatrix confusion_matrix(std::span<const int> actual, std::span<const int> predicted,
                                 int k);

// accuracy = trace/total; per-class precision/recall from column/row sums
// with the 0-convention for empty denominators; macro metrics are
// unweighted class means.
EvalReport summarize(const ConfusionMatrix& cm);

std::string report_to_json(const EvalReport& report);
std::string format_report(const EvalReport& report);  // human-readable table

}  // namespace scalpnet
