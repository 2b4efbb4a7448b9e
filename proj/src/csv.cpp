#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cknn/dataset.hpp"

namespace cknn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& cell, int row, const std::string& what) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw CsvError("cannot parse " + what + " '" + cell + "' at row " + std::to_string(row));
    return value;
}

int parse_arm(const std::string& cell, int row) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    int value = 0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw CsvError("cannot parse treatment '" + cell + "' at row " + std::to_string(row));
    return value;
}

struct ParsedHeader {
    std::vector<int> covariate_cols;
    int treatment_col = -1;
    int outcome_col = -1;
    int propensity_col = -1;
};

ParsedHeader parse_header(const std::string& line, const CsvSchema& schema,
                          bool require_labels) {
    const auto names = split_line(line);
    ParsedHeader h;
    for (int c = 0; c < static_cast<int>(names.size()); ++c) {
        const std::string& name = names[static_cast<std::size_t>(c)];
        if (name == schema.treatment) {
            if (h.treatment_col >= 0) throw CsvError("duplicate column '" + name + "'");
            h.treatment_col = c;
        } else if (name == schema.outcome) {
            if (h.outcome_col >= 0) throw CsvError("duplicate column '" + name + "'");
            h.outcome_col = c;
        } else if (name == schema.propensity) {
            if (h.propensity_col >= 0) throw CsvError("duplicate column '" + name + "'");
            h.propensity_col = c;
        } else {
            h.covariate_cols.push_back(c);
        }
    }
    if (require_labels) {
        if (h.treatment_col < 0) throw CsvError("missing column '" + schema.treatment + "'");
        if (h.outcome_col < 0) throw CsvError("missing column '" + schema.outcome + "'");
    }
    return h;
}

}  // namespace

TrialDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty file: " + path);
    const ParsedHeader header = parse_header(line, schema, /*require_labels=*/true);
    const int p = static_cast<int>(header.covariate_cols.size());
    const std::size_t n_cols = header.covariate_cols.size() + 2 +
                               (header.propensity_col >= 0 ? 1 : 0);

    std::vector<double> covariates;
    std::vector<int> treatments;
    std::vector<double> outcomes;
    std::vector<double> propensities;
    int max_arm = 0;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != n_cols)
            throw CsvError("expected " + std::to_string(n_cols) + " cells, got " +
                           std::to_string(cells.size()) + " at row " + std::to_string(row));
        for (int c : header.covariate_cols) {
            const double x = parse_double(cells[static_cast<std::size_t>(c)], row, "covariate");
            if (!std::isfinite(x))
                throw CsvError("non-finite covariate at row " + std::to_string(row));
            covariates.push_back(x);
        }
        const int a = parse_arm(cells[static_cast<std::size_t>(header.treatment_col)], row);
        if (a < 1) throw CsvError("arm label must be >= 1 at row " + std::to_string(row));
        max_arm = std::max(max_arm, a);
        treatments.push_back(a);
        const double r = parse_double(cells[static_cast<std::size_t>(header.outcome_col)], row,
                                      "outcome");
        if (!std::isfinite(r)) throw CsvError("non-finite outcome at row " + std::to_string(row));
        outcomes.push_back(r);
        if (header.propensity_col >= 0) {
            const double pi = parse_double(cells[static_cast<std::size_t>(header.propensity_col)],
                                           row, "propensity");
            if (!(pi > 0.0))
                throw CsvError("non-positive propensity at row " + std::to_string(row));
            if (!(pi <= 1.0))
                throw CsvError("propensity greater than one at row " + std::to_string(row));
            propensities.push_back(pi);
        }
    }
    const int n = static_cast<int>(treatments.size());
    if (n == 0) throw CsvError("no data rows in file: " + path);
    if (max_arm < 2) throw CsvError("fewer than two arms present in file: " + path);
    std::vector<int> counts(static_cast<std::size_t>(max_arm), 0);
    for (int a : treatments) ++counts[static_cast<std::size_t>(a - 1)];
    for (int a = 0; a < max_arm; ++a)
        if (counts[static_cast<std::size_t>(a)] == 0)
            throw CsvError("arm " + std::to_string(a + 1) + " has no subjects in file: " + path);

    if (header.propensity_col >= 0)
        return TrialDataset(std::move(covariates), n, p, std::move(treatments),
                            std::move(outcomes), std::move(propensities), max_arm);
    return TrialDataset::with_empirical_propensities(std::move(covariates), n, p,
                                                     std::move(treatments), std::move(outcomes),
                                                     max_arm);
}

std::vector<double> load_covariates_csv(const std::string& path, int* p_out,
                                        const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty file: " + path);
    const ParsedHeader header = parse_header(line, schema, /*require_labels=*/false);
    const std::size_t n_cols = header.covariate_cols.size() +
                               (header.treatment_col >= 0 ? 1 : 0) +
                               (header.outcome_col >= 0 ? 1 : 0) +
                               (header.propensity_col >= 0 ? 1 : 0);

    std::vector<double> covariates;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != n_cols)
            throw CsvError("expected " + std::to_string(n_cols) + " cells, got " +
                           std::to_string(cells.size()) + " at row " + std::to_string(row));
        for (int c : header.covariate_cols) {
            const double x = parse_double(cells[static_cast<std::size_t>(c)], row, "covariate");
            if (!std::isfinite(x))
                throw CsvError("non-finite covariate at row " + std::to_string(row));
            covariates.push_back(x);
        }
    }
    if (row == 0) throw CsvError("no data rows in file: " + path);
    *p_out = static_cast<int>(header.covariate_cols.size());
    return covariates;
}

void write_csv(const TrialDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot open file for writing: " + path);
    for (int j = 0; j < data.p(); ++j) out << "x" << (j + 1) << ",";
    out << "treatment,outcome,propensity\n";
    char buf[64];
    for (int i = 0; i < data.n(); ++i) {
        const auto row = data.covariate_row(i);
        for (int j = 0; j < data.p(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[static_cast<std::size_t>(j)]);
            out << buf << ",";
        }
        out << data.treatment(i) << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", data.outcome(i));
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", data.propensity(i));
        out << buf << "\n";
    }
    if (!out) throw CsvError("write failed: " + path);
}

}  // namespace cknn
