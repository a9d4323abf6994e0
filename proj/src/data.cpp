#include "sevfl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace sevfl {

namespace {

// RFC-4180 record splitter. Returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos, std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= text.size()) return false;
    std::string field;
    bool in_quotes = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field.push_back(c);
            }
            ++pos;
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            ++pos;
            if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
        ++pos;
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

bool blank_record(const std::vector<std::string>& fields) {
    return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

void Dataset::validate() const {
    if (features.rows() != labels.size()) {
        throw DataError("dataset: feature rows (" + std::to_string(features.rows()) +
                        ") != label count (" + std::to_string(labels.size()) + ")");
    }
    if (n_classes <= 0) throw DataError("dataset: n_classes must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw DataError("dataset: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(n_classes) + ")");
        }
    }
    if (feature_names.size() != features.cols()) {
        throw DataError("dataset: feature name count != feature column count");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : feature_names) {
        if (!seen.insert(n).second) throw DataError("dataset: duplicate feature name '" + n + "'");
    }
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = features.select_rows(rows);
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(labels[r]);
    out.feature_names = feature_names;
    out.n_classes = n_classes;
    return out;
}

Dataset parse_dataset(const std::string& csv_text, const CsvOptions& opts) {
    std::size_t pos = 0;
    std::vector<std::string> header;
    // Skip a UTF-8 byte order mark.
    if (csv_text.size() >= 3 && csv_text.compare(0, 3, "\xEF\xBB\xBF") == 0) pos = 3;
    if (!next_record(csv_text, pos, header) || blank_record(header)) {
        throw DataError("csv: missing header row");
    }
    for (auto& h : header) h = std::string(trim(h));

    std::set<std::string> names;
    for (const auto& h : header) {
        if (h.empty()) throw DataError("csv: empty column name in header");
        if (!names.insert(h).second) throw DataError("csv: duplicate header column '" + h + "'");
    }
    auto label_it = std::find(header.begin(), header.end(), opts.label_column);
    if (label_it == header.end()) {
        throw DataError("csv: label column '" + opts.label_column + "' not found in header");
    }
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());

    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col) ds.feature_names.push_back(header[c]);
    }
    const std::size_t n_feat = ds.feature_names.size();

    std::vector<double> values;
    std::vector<std::string> fields;
    std::size_t line = 1;
    while (next_record(csv_text, pos, fields)) {
        ++line;
        if (blank_record(fields)) continue;
        if (fields.size() != header.size()) {
            throw DataError("csv: row " + std::to_string(line) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v) || !std::isfinite(v)) {
                throw DataError("csv: non-numeric value '" + fields[c] + "' at row " + std::to_string(line) +
                                ", column '" + header[c] + "'");
            }
            if (c == label_col) {
                if (v != std::floor(v) || v < 0 || v > 1e9) {
                    throw DataError("csv: label '" + fields[c] + "' at row " + std::to_string(line) +
                                    " is not a non-negative integer");
                }
                int y = static_cast<int>(v);
                if (opts.strict_severity && y > 3) {
                    throw DataError("csv: severity label " + std::to_string(y) + " at row " +
                                    std::to_string(line) + " outside {0,1,2,3}");
                }
                ds.labels.push_back(y);
            } else {
                values.push_back(v);
            }
        }
    }
    if (ds.labels.empty()) throw DataError("csv: no rows");

    ds.features = Matrix(ds.labels.size(), n_feat, std::move(values));
    ds.n_classes = opts.strict_severity ? 4 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    ds.validate();
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("csv: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), opts);
}

std::string format_dataset_csv(const Dataset& ds, const std::string& label_column) {
    std::string out;
    for (const auto& n : ds.feature_names) {
        out += n;
        out += ',';
    }
    out += label_column;
    out += '\n';
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (double v : ds.features.row(r)) {
            out += format_double(v);
            out += ',';
        }
        out += std::to_string(ds.labels[r]);
        out += '\n';
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds, const std::string& label_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("csv: cannot write '" + path.string() + "'");
    out << format_dataset_csv(ds, label_column);
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == fold) rows.push_back(i);
    }
    return rows;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != fold) rows.push_back(i);
    }
    return rows;
}

FoldPlan make_stratified_folds(std::span<const int> labels, int n_classes, int k, std::uint64_t seed) {
    if (k < 2) throw DataError("folds: k must be >= 2");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k)) {
            throw DataError("folds: class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                            " rows, fewer than k=" + std::to_string(k));
        }
    }

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(labels.size(), -1);
    std::mt19937_64 rng(seed);
    // Rotating the starting fold per class keeps the total fold sizes within 1.
    std::size_t offset = 0;
    for (auto& rows : by_class) {
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            plan.assignments[rows[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
        }
        offset = (offset + rows.size()) % static_cast<std::size_t>(k);
    }
    return plan;
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("largest_remainder: no weights");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("largest_remainder: bad weight");
        sum += w;
    }
    if (sum <= 0.0) throw std::invalid_argument("largest_remainder: weights sum to zero");

    std::vector<std::size_t> counts(weights.size());
    std::vector<double> frac(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double quota = static_cast<double>(total) * (weights[i] / sum);
        double fl = std::floor(quota);
        counts[i] = static_cast<std::size_t>(fl);
        frac[i] = quota - fl;
        assigned += counts[i];
    }
    // Floating error can overshoot by a unit; take it back from the smallest remainders.
    while (assigned > total) {
        std::size_t best = weights.size();
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (counts[i] > 0 && (best == weights.size() || frac[i] < frac[best])) best = i;
        }
        --counts[best];
        frac[best] += 1.0;
        --assigned;
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
        ++counts[order[i]];
        ++assigned;
    }
    return counts;
}

namespace {

std::vector<std::vector<std::size_t>> group_by_class(std::span<const std::size_t> rows, std::span<const int> labels) {
    int max_label = -1;
    for (auto r : rows) max_label = std::max(max_label, labels[r]);
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(max_label + 1));
    for (auto r : rows) groups[static_cast<std::size_t>(labels[r])].push_back(r);
    return groups;
}

void check_partition_args(std::span<const std::size_t> rows, int n_clients) {
    if (n_clients < 1) throw DataError("partition: n_clients must be >= 1");
    if (rows.empty()) throw DataError("partition: no rows to partition");
    if (static_cast<std::size_t>(n_clients) > rows.size()) {
        throw DataError("partition: n_clients (" + std::to_string(n_clients) + ") exceeds row count (" +
                        std::to_string(rows.size()) + ")");
    }
}

}  // namespace

ClientPartition partition_iid(std::span<const std::size_t> rows, std::span<const int> labels, int n_clients,
                              std::uint64_t seed) {
    check_partition_args(rows, n_clients);
    ClientPartition part;
    part.scheme = PartitionScheme::IID;
    part.seed = seed;
    part.row_indices.resize(static_cast<std::size_t>(n_clients));

    const auto n = static_cast<std::size_t>(n_clients);
    std::mt19937_64 rng(seed);
    std::size_t offset = 0;
    for (auto& group : group_by_class(rows, labels)) {
        std::shuffle(group.begin(), group.end(), rng);
        for (std::size_t i = 0; i < group.size(); ++i) {
            part.row_indices[(offset + i) % n].push_back(group[i]);
        }
        offset = (offset + group.size()) % n;
    }
    for (auto& list : part.row_indices) std::sort(list.begin(), list.end());
    return part;
}

ClientPartition partition_dirichlet(std::span<const std::size_t> rows, std::span<const int> labels, int n_clients,
                                    double alpha, std::uint64_t seed) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DataError("partition: alpha must be positive");
    check_partition_args(rows, n_clients);
    ClientPartition part;
    part.scheme = PartitionScheme::Dirichlet;
    part.alpha = alpha;
    part.seed = seed;
    const auto n = static_cast<std::size_t>(n_clients);
    part.row_indices.resize(n);

    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (auto& group : group_by_class(rows, labels)) {
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& x : p) {
            x = gamma(rng);
            sum += x;
        }
        if (sum <= 0.0) {
            // Every draw underflowed (tiny alpha): all mass on one client.
            std::fill(p.begin(), p.end(), 0.0);
            p[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
        }
        if (group.empty()) continue;
        auto counts = largest_remainder(group.size(), p);
        std::shuffle(group.begin(), group.end(), rng);
        std::size_t next = 0;
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t j = 0; j < counts[c]; ++j) part.row_indices[c].push_back(group[next++]);
        }
    }
    for (auto& list : part.row_indices) std::sort(list.begin(), list.end());

    // Empty clients take the highest row index of the currently largest client.
    for (auto& list : part.row_indices) {
        if (!list.empty()) continue;
        auto donor = std::max_element(part.row_indices.begin(), part.row_indices.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
        list.push_back(donor->back());
        donor->pop_back();
    }
    return part;
}

std::string to_string(PartitionScheme s) {
    return s == PartitionScheme::IID ? "iid" : "dirichlet";
}

PartitionScheme parse_partition_scheme(const std::string& s) {
    if (s == "iid" || s == "IID") return PartitionScheme::IID;
    if (s == "dirichlet" || s == "Dirichlet" || s == "non-iid") return PartitionScheme::Dirichlet;
    throw std::invalid_argument("unknown partition scheme '" + s + "'");
}

nlohmann::json to_json(const FoldPlan& plan) {
    return {{"k", plan.k}, {"seed", plan.seed}, {"assignments", plan.assignments}};
}

nlohmann::json to_json(const ClientPartition& part) {
    nlohmann::json j{{"scheme", to_string(part.scheme)}, {"seed", part.seed}, {"clients", part.row_indices}};
    if (part.scheme == PartitionScheme::Dirichlet) j["alpha"] = part.alpha;
    return j;
}

}  // namespace sevfl
