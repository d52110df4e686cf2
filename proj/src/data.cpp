#include "tabssl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tabssl/rng.hpp"

namespace tabssl {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

// Splits CSV text into records. Double-quoted fields may contain commas,
// newlines and doubled quotes.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            if (any || !field.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            any = false;
        } else if (c != '\r') {
            field.push_back(c);
            any = true;
        }
    }
    if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field");
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

DataTable DataTable::select_rows(std::span<const std::size_t> rows) const {
    DataTable out;
    out.label_column = label_column;
    out.n_rows = rows.size();
    out.columns.reserve(columns.size());
    for (const Column& col : columns) {
        Column c{col.name, col.kind, {}, {}};
        if (col.kind == ColumnKind::Numeric) {
            c.numbers.reserve(rows.size());
            for (std::size_t r : rows) c.numbers.push_back(col.numbers.at(r));
        } else {
            c.categories.reserve(rows.size());
            for (std::size_t r : rows) c.categories.push_back(col.categories.at(r));
        }
        out.columns.push_back(std::move(c));
    }
    if (label_column) {
        out.labels.reserve(rows.size());
        for (std::size_t r : rows) out.labels.push_back(labels.at(r));
    }
    return out;
}

const Column& DataTable::column(std::string_view name) const {
    for (const Column& c : columns) {
        if (c.name == name) return c;
    }
    throw Error(ErrorCode::SchemaMismatch, "no column named '" + std::string(name) + "'");
}

Schema parse_schema(std::string_view text) {
    Schema schema;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto comma = t.rfind(',');
        if (comma == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "schema line " + std::to_string(lineno) + " lacks a kind");
        }
        const std::string name(trim(t.substr(0, comma)));
        const std::string_view kind = trim(t.substr(comma + 1));
        SchemaKind k;
        if (kind == "numeric") {
            k = SchemaKind::Numeric;
        } else if (kind == "categorical") {
            k = SchemaKind::Categorical;
        } else if (kind == "label") {
            k = SchemaKind::Label;
        } else {
            throw Error(ErrorCode::ParseError, "schema line " + std::to_string(lineno) + ": unknown kind '" + std::string(kind) + "'");
        }
        schema.emplace_back(name, k);
    }
    return schema;
}

Schema load_schema(const std::filesystem::path& path) { return parse_schema(read_file(path)); }

DataTable parse_csv(std::string_view text, const std::optional<Schema>& schema, const std::optional<std::string>& label_column) {
    const auto records = split_records(text);
    if (records.empty()) throw Error(ErrorCode::EmptyTable, "CSV has no header");
    std::vector<std::string> header;
    for (const auto& h : records.front()) header.emplace_back(trim(h));
    if (records.size() < 2) throw Error(ErrorCode::EmptyTable, "CSV has no data rows");
    const std::size_t width = header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width) {
            throw Error(ErrorCode::RaggedRows, "row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                                   " fields, header has " + std::to_string(width));
        }
    }

    std::map<std::string, SchemaKind> kinds;
    std::optional<std::string> label = label_column;
    if (schema) {
        for (const auto& [name, kind] : *schema) {
            if (std::find(header.begin(), header.end(), name) == header.end()) {
                throw Error(ErrorCode::SchemaMismatch, "schema names column '" + name + "' absent from the CSV");
            }
            kinds[name] = kind;
            if (kind == SchemaKind::Label && !label) label = name;
        }
    }
    if (label && std::find(header.begin(), header.end(), *label) == header.end()) {
        throw Error(ErrorCode::SchemaMismatch, "label column '" + *label + "' absent from the CSV");
    }

    DataTable table;
    table.n_rows = records.size() - 1;
    table.label_column = label;
    for (std::size_t c = 0; c < width; ++c) {
        const std::string& name = header[c];
        auto cell = [&](std::size_t r) { return std::string_view(records[r + 1][c]); };
        if (label && name == *label) {
            table.labels.reserve(table.n_rows);
            for (std::size_t r = 0; r < table.n_rows; ++r) {
                const std::string_view v = trim(cell(r));
                if (v.empty()) throw Error(ErrorCode::MissingLabel, "row " + std::to_string(r + 1) + " has no label");
                table.labels.emplace_back(v);
            }
            continue;
        }
        const auto declared = kinds.find(name);
        bool numeric;
        if (declared != kinds.end() && declared->second != SchemaKind::Label) {
            numeric = declared->second == SchemaKind::Numeric;
        } else {
            numeric = true;
            for (std::size_t r = 0; r < table.n_rows && numeric; ++r) {
                const std::string_view v = trim(cell(r));
                if (!v.empty() && !parse_number(v)) numeric = false;
            }
        }
        Column col{name, numeric ? ColumnKind::Numeric : ColumnKind::Categorical, {}, {}};
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            const std::string_view v = trim(cell(r));
            if (numeric) {
                col.numbers.push_back(v.empty() ? std::nullopt : parse_number(v));
            } else {
                col.categories.push_back(v.empty() ? std::nullopt : std::optional<std::string>(std::string(v)));
            }
        }
        table.columns.push_back(std::move(col));
    }
    return table;
}

DataTable load_csv(const std::filesystem::path& path, const std::optional<Schema>& schema, const std::optional<std::string>& label_column) {
    return parse_csv(read_file(path), schema, label_column);
}

void write_csv(const DataTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    bool first = true;
    for (const Column& c : table.columns) {
        out << (first ? "" : ",") << quote_if_needed(c.name);
        first = false;
    }
    if (table.label_column) out << (first ? "" : ",") << quote_if_needed(*table.label_column);
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        first = true;
        for (const Column& c : table.columns) {
            if (!first) out << ',';
            first = false;
            if (c.kind == ColumnKind::Numeric) {
                if (c.numbers[r]) {
                    std::snprintf(buf, sizeof buf, "%.17g", *c.numbers[r]);
                    out << buf;
                }
            } else if (c.categories[r]) {
                out << quote_if_needed(*c.categories[r]);
            }
        }
        if (table.label_column) out << (first ? "" : ",") << quote_if_needed(table.labels[r]);
        out << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

LabelEncoding encode_labels(const std::vector<std::string>& labels) {
    LabelEncoding enc;
    std::set<std::string> distinct(labels.begin(), labels.end());
    enc.classes.assign(distinct.begin(), distinct.end());
    const bool all_numeric = std::all_of(enc.classes.begin(), enc.classes.end(), [](const std::string& s) { return parse_number(s).has_value(); });
    if (all_numeric) {
        std::stable_sort(enc.classes.begin(), enc.classes.end(),
                         [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
    }
    enc.codes = encode_with(enc.classes, labels);
    return enc;
}

std::vector<int> encode_with(const std::vector<std::string>& classes, const std::vector<std::string>& labels) {
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], static_cast<int>(i));
    std::vector<int> codes;
    codes.reserve(labels.size());
    for (const auto& l : labels) {
        const auto it = index.find(l);
        codes.push_back(it == index.end() ? -1 : it->second);
    }
    return codes;
}

PreprocessPlan fit_preprocess(const DataTable& train) {
    if (train.n_rows == 0) throw Error(ErrorCode::EmptyTable, "cannot fit preprocessing on zero rows");
    PreprocessPlan plan;
    for (const Column& col : train.columns) {
        ColumnPlan cp;
        cp.name = col.name;
        cp.kind = col.kind;
        cp.offset = plan.width;
        if (col.kind == ColumnKind::Numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& v : col.numbers) {
                if (v) {
                    sum += *v;
                    ++count;
                }
            }
            if (count > 0) {
                cp.mean = sum / static_cast<double>(count);
                double ss = 0.0;
                for (const auto& v : col.numbers) {
                    if (v) ss += (*v - cp.mean) * (*v - cp.mean);
                }
                cp.std = std::max(std::sqrt(ss / static_cast<double>(count)), kStdFloor);
            }
            plan.width += 1;
        } else {
            std::map<std::string, std::size_t> counts;
            for (const auto& v : col.categories) {
                if (v) ++counts[*v];
            }
            std::size_t best = 0;
            for (const auto& [category, n] : counts) {
                cp.categories.push_back(category);
                if (n > best) {  // strict: ties keep the lexicographically first
                    best = n;
                    cp.mode = category;
                }
            }
            plan.width += cp.categories.size();
        }
        plan.columns.push_back(std::move(cp));
    }
    return plan;
}

Tensor apply_preprocess(const PreprocessPlan& plan, const DataTable& table) {
    if (table.columns.size() != plan.columns.size()) {
        throw Error(ErrorCode::SchemaMismatch, "table has " + std::to_string(table.columns.size()) + " feature columns, plan expects " +
                                                   std::to_string(plan.columns.size()));
    }
    for (std::size_t c = 0; c < plan.columns.size(); ++c) {
        if (table.columns[c].name != plan.columns[c].name || table.columns[c].kind != plan.columns[c].kind) {
            throw Error(ErrorCode::SchemaMismatch, "column " + std::to_string(c) + " is '" + table.columns[c].name +
                                                       "', plan expects '" + plan.columns[c].name + "' of the fitted kind");
        }
    }
    std::vector<double> out(table.n_rows * plan.width, 0.0);
    for (std::size_t c = 0; c < plan.columns.size(); ++c) {
        const ColumnPlan& cp = plan.columns[c];
        const Column& col = table.columns[c];
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            double* row = out.data() + r * plan.width + cp.offset;
            if (cp.kind == ColumnKind::Numeric) {
                const double v = col.numbers[r].value_or(cp.mean);
                row[0] = (v - cp.mean) / cp.std;
            } else {
                const std::optional<std::string>& v = col.categories[r] ? col.categories[r] : cp.mode;
                if (!v) continue;
                const auto it = std::lower_bound(cp.categories.begin(), cp.categories.end(), *v);
                if (it != cp.categories.end() && *it == *v) row[it - cp.categories.begin()] = 1.0;
            }
        }
    }
    return Tensor({table.n_rows, plan.width}, std::move(out));
}

SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(ErrorCode::InvalidValue, "train fraction must lie in (0, 1)");
    if (n < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 rows to split, got " + std::to_string(n));
    // The small epsilon keeps products like 0.29 * 100 from flooring to 28.
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    if (n_train == 0 || n_train == n) {
        throw Error(ErrorCode::TooFewRows, "a " + std::to_string(train_fraction) + " split of " + std::to_string(n) + " rows leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, "split");
    std::shuffle(order.begin(), order.end(), rng);
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

std::pair<DataTable, DataTable> split_train_test(const DataTable& table, double train_fraction, std::uint64_t seed) {
    const SplitIndices s = split_indices(table.n_rows, train_fraction, seed);
    return {table.select_rows(s.train), table.select_rows(s.test)};
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n) throw Error(ErrorCode::InvalidK, "k must lie in [2, " + std::to_string(n) + "], got " + std::to_string(k));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, "kfold");
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> bounds{0};
    for (std::size_t f = 0; f < k; ++f) bounds.push_back(bounds.back() + n / k + (f < n % k ? 1 : 0));
    std::vector<Fold> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            (i >= bounds[f] && i < bounds[f + 1] ? folds[f].val : folds[f].train).push_back(order[i]);
        }
    }
    return folds;
}

void AugmentConfig::validate() const {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error(ErrorCode::InvalidValue, "noise_sigma must be >= 0");
    if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw Error(ErrorCode::InvalidValue, "mask_prob must lie in [0, 1)");
    if (smote.k_neighbors < 1) throw Error(ErrorCode::InvalidValue, "smote k_neighbors must be >= 1");
}

std::pair<Tensor, Tensor> make_views(const Tensor& x, const AugmentConfig& aug, std::uint64_t seed) {
    aug.validate();
    auto view = [&](std::uint64_t index) {
        std::vector<double> v(x.values().begin(), x.values().end());
        Rng rng = make_rng(seed, "view", index);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::bernoulli_distribution drop(aug.mask_prob);
        for (double& e : v) {
            if (aug.noise_sigma > 0.0) e += aug.noise_sigma * noise(rng);
            if (aug.mask_prob > 0.0 && drop(rng)) e = 0.0;
        }
        return Tensor(x.shape(), std::move(v));
    };
    return {view(1), view(2)};
}

SmoteResult smote(const Tensor& features, const std::vector<int>& labels, std::size_t k_neighbors, std::uint64_t seed) {
    if (labels.empty()) throw Error(ErrorCode::NoLabels, "SMOTE needs labels");
    if (features.rank() != 2 || features.dim(0) != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "SMOTE got " + std::to_string(labels.size()) + " labels for features of shape " +
                                                   shape_to_string(features.shape()));
    }
    if (k_neighbors < 1) throw Error(ErrorCode::InvalidValue, "SMOTE k_neighbors must be >= 1");
    const std::size_t d = features.dim(1);
    const auto x = features.values();

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    std::size_t majority = 0;
    for (const auto& [label, rows] : members) majority = std::max(majority, rows.size());
    for (const auto& [label, rows] : members) {
        if (rows.size() < majority && rows.size() < 2) {
            throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(label) + " has a single sample");
        }
    }

    std::vector<double> out(x.begin(), x.end());
    std::vector<int> out_labels = labels;
    Rng rng = make_rng(seed, "smote");
    auto dist2 = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (x[a * d + j] - x[b * d + j]) * (x[a * d + j] - x[b * d + j]);
        return s;
    };
    for (const auto& [label, rows] : members) {
        if (rows.size() >= majority) continue;
        const std::size_t k_eff = std::min(k_neighbors, rows.size() - 1);
        // Nearest same-class neighbours of each member; ties by row order.
        std::vector<std::vector<std::size_t>> neighbours(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) {
            std::vector<std::pair<double, std::size_t>> cand;
            for (std::size_t b = 0; b < rows.size(); ++b) {
                if (b != a) cand.emplace_back(dist2(rows[a], rows[b]), rows[b]);
            }
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k_eff), cand.end());
            for (std::size_t j = 0; j < k_eff; ++j) neighbours[a].push_back(cand[j].second);
        }
        std::uniform_int_distribution<std::size_t> pick_point(0, rows.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_neighbour(0, k_eff - 1);
        std::uniform_real_distribution<double> gap(0.0, 1.0);
        for (std::size_t s = rows.size(); s < majority; ++s) {
            const std::size_t a = pick_point(rng);
            const std::size_t p = rows[a];
            const std::size_t q = neighbours[a][pick_neighbour(rng)];
            const double lambda = gap(rng);
            for (std::size_t j = 0; j < d; ++j) out.push_back(x[p * d + j] + lambda * (x[q * d + j] - x[p * d + j]));
            out_labels.push_back(label);
        }
    }
    const std::size_t n_out = out_labels.size();
    return {Tensor({n_out, d}, std::move(out)), std::move(out_labels)};
}

DataTable make_blobs(const BlobsConfig& config, std::uint64_t seed) {
    if (config.n_rows == 0 || config.n_features == 0 || config.n_classes == 0) {
        throw Error(ErrorCode::InvalidValue, "blobs need at least one row, feature and class");
    }
    Rng rng = make_rng(seed, "blobs");
    std::uniform_real_distribution<double> centre(-config.center_box, config.center_box);
    std::normal_distribution<double> noise(0.0, config.cluster_std);
    std::vector<std::vector<double>> centres(config.n_classes, std::vector<double>(config.n_features));
    for (auto& c : centres) {
        for (double& v : c) v = centre(rng);
    }
    DataTable table;
    table.n_rows = config.n_rows;
    table.label_column = "label";
    for (std::size_t j = 0; j < config.n_features; ++j) table.columns.push_back(Column{"f" + std::to_string(j), ColumnKind::Numeric, {}, {}});
    for (std::size_t r = 0; r < config.n_rows; ++r) {
        const std::size_t cls = r % config.n_classes;
        for (std::size_t j = 0; j < config.n_features; ++j) table.columns[j].numbers.emplace_back(centres[cls][j] + noise(rng));
        table.labels.push_back(std::to_string(cls));
    }
    return table;
}

}  // namespace tabssl
