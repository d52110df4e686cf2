#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabssl/tensor.hpp"

namespace tabssl {

enum class ColumnKind { Numeric, Categorical };

// Exactly one of numbers / categories is populated, per kind. An empty
// optional is a missing cell.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::optional<double>> numbers;
    std::vector<std::optional<std::string>> categories;

    std::size_t size() const { return kind == ColumnKind::Numeric ? numbers.size() : categories.size(); }
    bool missing(std::size_t row) const {
        return kind == ColumnKind::Numeric ? !numbers[row].has_value() : !categories[row].has_value();
    }
};

struct DataTable {
    std::vector<Column> columns;  // feature columns, file order, label excluded
    std::optional<std::string> label_column;
    std::vector<std::string> labels;  // raw label text, one per row when label_column is set
    std::size_t n_rows = 0;

    DataTable select_rows(std::span<const std::size_t> rows) const;
    const Column& column(std::string_view name) const;
};

enum class SchemaKind { Numeric, Categorical, Label };
using Schema = std::vector<std::pair<std::string, SchemaKind>>;

// Lines of `name,kind`; blank lines and '#' comments are skipped.
Schema parse_schema(std::string_view text);
Schema load_schema(const std::filesystem::path& path);

/// CSV with a header row. Empty fields are missing. Without a schema entry
/// a column is numeric iff every non-missing cell parses as a finite number;
/// under an explicit numeric schema, unparseable cells become missing.
/// label_column overrides (or supplies) the schema's label.
/// Throws FileNotFound, RaggedRows, EmptyTable, SchemaMismatch, MissingLabel.
DataTable load_csv(const std::filesystem::path& path, const std::optional<Schema>& schema = std::nullopt,
                   const std::optional<std::string>& label_column = std::nullopt);
DataTable parse_csv(std::string_view text, const std::optional<Schema>& schema = std::nullopt,
                    const std::optional<std::string>& label_column = std::nullopt);

void write_csv(const DataTable& table, const std::filesystem::path& path);

struct LabelEncoding {
    std::vector<std::string> classes;  // sorted; numerically when every label is a number
    std::vector<int> codes;            // index into classes, per row
};

LabelEncoding encode_labels(const std::vector<std::string>& labels);
// Codes for labels under an existing class list; unknown labels get -1.
std::vector<int> encode_with(const std::vector<std::string>& classes, const std::vector<std::string>& labels);

struct ColumnPlan {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    double mean = 0.0;  // also the imputation value
    double std = 1.0;
    std::vector<std::string> categories;
    std::optional<std::string> mode;  // imputation value; absent if no training value was seen
    std::size_t offset = 0;           // first output column
};

struct PreprocessPlan {
    std::vector<ColumnPlan> columns;
    std::size_t width = 0;
};

inline constexpr double kStdFloor = 1e-12;

// Throws EmptyTable.
PreprocessPlan fit_preprocess(const DataTable& train);
// Throws SchemaMismatch when the table's columns differ from the plan's.
Tensor apply_preprocess(const PreprocessPlan& plan, const DataTable& table);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, then the first floor(fraction * n) rows train.
/// Throws TooFewRows (n < 2 or an empty side) and InvalidValue.
SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed);
std::pair<DataTable, DataTable> split_train_test(const DataTable& table, double train_fraction, std::uint64_t seed);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Shuffled, then k folds; the first n % k folds hold one extra row. Throws InvalidK.
std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct SmoteConfig {
    bool enabled = false;
    std::size_t k_neighbors = 5;
};

struct AugmentConfig {
    double noise_sigma = 0.1;
    double mask_prob = 0.0;
    SmoteConfig smote;

    void validate() const;  // throws InvalidValue
};

/// Two independently perturbed copies of x: Gaussian noise of std
/// noise_sigma, then each feature zeroed with probability mask_prob.
std::pair<Tensor, Tensor> make_views(const Tensor& x, const AugmentConfig& aug, std::uint64_t seed);

struct SmoteResult {
    Tensor features;
    std::vector<int> labels;
};

/// Oversamples every class up to the majority count. Original rows come
/// first, unchanged; synthetic rows follow class by class in label order.
/// Throws NoLabels, LengthMismatch, ClassTooSmall, InvalidValue (k = 0).
SmoteResult smote(const Tensor& features, const std::vector<int>& labels, std::size_t k_neighbors, std::uint64_t seed);

struct BlobsConfig {
    std::size_t n_rows = 600;
    std::size_t n_features = 16;
    std::size_t n_classes = 3;
    double center_box = 10.0;  // centers uniform in [-box, box] per feature
    double cluster_std = 1.0;
};

// Isotropic Gaussian clusters; features f0..f{d-1} plus a "label" column.
DataTable make_blobs(const BlobsConfig& config, std::uint64_t seed);

}  // namespace tabssl
