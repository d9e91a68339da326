#include "scalpnet/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "scalpnet/error.hpp"

namespace scalpnet {

uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), uint64_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const int> actual, std::span<const int> predicted,
                                 int k) {
    if (actual.empty()) throw Error("confusion_matrix needs at least one sample");
    if (actual.size() != predicted.size())
        throw Error("confusion_matrix: actual has " + std::to_string(actual.size()) +
                    " entries but predicted has " + std::to_string(predicted.size()));
    if (k < 1) throw Error("confusion_matrix needs at least one class");

    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.assign(static_cast<size_t>(k) * k, 0);
    for (size_t i = 0; i < actual.size(); ++i) {
        const int a = actual[i], p = predicted[i];
        if (a < 0 || a >= k || p < 0 || p >= k)
            throw Error("confusion_matrix label out of range at sample " + std::to_string(i));
        cm.at(a, p) += 1;
    }
    return cm;
}

EvalReport summarize(const ConfusionMatrix& cm) {
    const uint64_t total = cm.total();
    if (cm.k < 1 || total == 0) throw Error("cannot summarize an empty confusion matrix");

    EvalReport report;
    report.matrix = cm;
    report.per_class.resize(cm.k);

    uint64_t trace = 0;
    for (int c = 0; c < cm.k; ++c) {
        trace += cm.at(c, c);
        uint64_t col = 0, row = 0;
        for (int o = 0; o < cm.k; ++o) {
            col += cm.at(o, c);
            row += cm.at(c, o);
        }
        ClassMetrics& m = report.per_class[c];
        m.precision = col == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / static_cast<double>(col);
        m.recall = row == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        m.f1 = (m.precision + m.recall) == 0.0
                   ? 0.0
                   : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f1 += m.f1;
    }
    report.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    report.macro_precision /= cm.k;
    report.macro_recall /= cm.k;
    report.macro_f1 /= cm.k;
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["macro_precision"] = report.macro_precision;
    j["macro_recall"] = report.macro_recall;
    j["macro_f1"] = report.macro_f1;

    nlohmann::json per_class = nlohmann::json::object();
    for (int c = 0; c < report.matrix.k; ++c) {
        const std::string name = c < static_cast<int>(report.matrix.class_names.size())
                                     ? report.matrix.class_names[c]
                                     : "class_" + std::to_string(c);
        per_class[name] = {{"precision", report.per_class[c].precision},
                           {"recall", report.per_class[c].recall},
                           {"f1", report.per_class[c].f1}};
    }
    j["per_class"] = per_class;

    nlohmann::json rows = nlohmann::json::array();
    for (int a = 0; a < report.matrix.k; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (int p = 0; p < report.matrix.k; ++p) row.push_back(report.matrix.at(a, p));
        rows.push_back(row);
    }
    j["confusion_matrix"] = rows;
    j["class_names"] = report.matrix.class_names;
    return j.dump(2);
}

std::string format_report(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);

    size_t name_width = 5;
    for (const auto& n : report.matrix.class_names) name_width = std::max(name_width, n.size());

    os << "confusion matrix (rows = actual, columns = predicted)\n";
    for (int a = 0; a < report.matrix.k; ++a) {
        const std::string name = a < static_cast<int>(report.matrix.class_names.size())
                                     ? report.matrix.class_names[a]
                                     : "class_" + std::to_string(a);
        os << "  " << std::left << std::setw(static_cast<int>(name_width)) << name << std::right;
        for (int p = 0; p < report.matrix.k; ++p) os << std::setw(8) << report.matrix.at(a, p);
        os << "\n";
    }
    os << "\n";
    os << "  " << std::left << std::setw(static_cast<int>(name_width)) << "class"
       << "  precision   recall       f1\n";
    for (int c = 0; c < report.matrix.k; ++c) {
        const std::string name = c < static_cast<int>(report.matrix.class_names.size())
                                     ? report.matrix.class_names[c]
                                     : "class_" + std::to_string(c);
        os << "  " << std::left << std::setw(static_cast<int>(name_width)) << name << std::right
           << std::setw(11) << report.per_class[c].precision << std::setw(9)
           << report.per_class[c].recall << std::setw(9) << report.per_class[c].f1 << "\n";
    }
    os << "\n";
    os << "accuracy        " << report.accuracy << "\n";
    os << "macro precision " << report.macro_precision << "\n";
    os << "macro recall    " << report.macro_recall << "\n";
    os << "macro f1        " << report.macro_f1 << "\n";
    return os.str();
}

}  // namespace scalpnet
