#pragma once

// Two-compound quantal bioassay: dataset handling and assembly of the
// four-parameter two-line logistic model (intercept/slope per compound).

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ciuupi/regmodel.hpp"

namespace ciuupi {

struct BioassayRow {
    double x = 0.0;  // log10 dose
    int n = 0, r = 0;              // compound A: group size, responders
    int n_prime = 0, r_prime = 0;  // compound B
};

struct BioassayDataset {
    std::vector<BioassayRow> rows;
    std::string label_a = "A";
    std::string label_b = "B";

    void validate() const {
        if (rows.size() < 2)
            throw std::domain_error("BioassayDataset: need at least 2 dose levels");
        int distinct = 1;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].x != rows[0].x) ++distinct;
        if (distinct < 2)
            throw std::domain_error("BioassayDataset: need >= 2 distinct doses per compound");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            if (row.n <= 0 || row.r < 0 || row.r > row.n || row.n_prime <= 0 ||
                row.r_prime < 0 || row.r_prime > row.n_prime)
                throw std::domain_error("BioassayDataset: bad counts in data row " +
                                        std::to_string(i + 1));
        }
    }
};

// Grewal (1952) Morphine/Amidone quantal bioassay in mice.
inline BioassayDataset grewal_dataset() {
    BioassayDataset d;
    d.label_a = "Morphine";
    d.label_b = "Amidone";
    d.rows = {{0.18, 103, 19, 60, 14}, {0.48, 120, 53, 110, 54}, {0.78, 123, 83, 100, 81}};
    return d;
}

// Parses the delimited two-compound format with header
// `x n r n_prime r_prime`, one row per dose. Lines starting with '#' are
// comments. Errors carry the 1-based row number.
inline BioassayDataset parse_bioassay_dataset(std::istream& in) {
    BioassayDataset d;
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = line;
        auto pos = trimmed.find_first_not_of(" \t\r");
        if (pos == std::string::npos || trimmed[pos] == '#') continue;
        if (!header_seen) {
            std::istringstream hs(line);
            std::string c0, c1, c2, c3, c4;
            hs >> c0 >> c1 >> c2 >> c3 >> c4;
            if (c0 != "x" || c1 != "n" || c2 != "r" || c3 != "n_prime" || c4 != "r_prime")
                throw std::runtime_error("dataset: expected header 'x n r n_prime r_prime'");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        BioassayRow row;
        if (!(ls >> row.x >> row.n >> row.r >> row.n_prime >> row.r_prime))
            throw std::runtime_error("dataset: malformed row at line " + std::to_string(lineno));
        d.rows.push_back(row);
    }
    if (!header_seen) throw std::runtime_error("dataset: missing header");
    d.validate();
    return d;
}

// Generic binomial dataset, header `n y x1 x2 ...`.
inline std::shared_ptr<BinomialLogitModel> parse_binomial_dataset(std::istream& in) {
    std::vector<BinomialObservation> obs;
    std::string line;
    bool header_seen = false;
    std::size_t p = 0;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        if (!header_seen) {
            std::istringstream hs(line);
            std::string c0, c1, cx;
            hs >> c0 >> c1;
            if (c0 != "n" || c1 != "y")
                throw std::runtime_error("dataset: expected header 'n y x1 x2 ...'");
            while (hs >> cx) ++p;
            if (p == 0) throw std::runtime_error("dataset: no covariate columns");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        BinomialObservation o;
        o.x.resize(p);
        if (!(ls >> o.trials >> o.successes))
            throw std::runtime_error("dataset: malformed row at line " + std::to_string(lineno));
        for (std::size_t j = 0; j < p; ++j)
            if (!(ls >> o.x[j]))
                throw std::runtime_error("dataset: malformed row at line " +
                                         std::to_string(lineno));
        obs.push_back(std::move(o));
    }
    if (!header_seen) throw std::runtime_error("dataset: missing header");
    return std::make_shared<BinomialLogitModel>(std::move(obs), p);
}

// Builds the two-line logistic model: compound A rows get design
// (1, x, 0, 0), compound B rows (0, 0, 1, x). Parameter of interest is the
// ED_z log-dose difference; prior parameter is the slope difference, with
// prior value t (parallelism: t = 0).
inline RegressionSpec build_bioassay_spec(const BioassayDataset& d, double z, double t = 0.0) {
    d.validate();
    std::vector<BinomialObservation> obs;
    for (const auto& row : d.rows) obs.push_back({{1.0, row.x, 0.0, 0.0}, row.n, row.r});
    for (const auto& row : d.rows)
        obs.push_back({{0.0, 0.0, 1.0, row.x}, row.n_prime, row.r_prime});

    BioassayFunctionals fns = bioassay_functionals(z);
    RegressionSpec spec;
    spec.model = std::make_shared<BinomialLogitModel>(std::move(obs), 4);
    spec.g = fns.g;
    spec.h = fns.h;
    spec.t = t;
    return spec;
}

}  // namespace ciuupi
