#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bodycomp/cox.hpp"

namespace bodycomp {

struct MlpSpec {
    std::vector<int> layer_widths;       // hidden widths
    std::vector<double> dropout_probs;   // one per hidden layer, in [0,1)
    int epochs = 1;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    /// Throws InvalidSpec.
    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
};

struct MlpModel {
    MlpSpec spec;
    int input_width = 0;
    /// Hidden layers followed by the single-unit output layer.
    std::vector<DenseLayer> layers;
    bool trained = false;

    /// PyTorch-style U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for weights and biases.
    static MlpModel initialise(const MlpSpec& spec, int input_width, std::mt19937_64& rng);
    /// All-zero parameters with the shapes implied by `spec`.
    static MlpModel zeros(const MlpSpec& spec, int input_width);
};

/// Hidden: affine, ReLU, inverted dropout in training mode. Output: affine, sigmoid.
/// `rng` must be given exactly when `training_mode` is set. Throws ShapeMismatch, DomainError.
double mlp_forward(const MlpModel& model, const Eigen::VectorXd& features, bool training_mode,
                   std::mt19937_64* rng = nullptr);

/// One probability per row, inference mode.
Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::MatrixXd& features);

struct MlpGradients {
    std::vector<DenseLayer> layers;
};

/// Mean binary cross-entropy over the rows and its gradient. With `rng`, one dropout mask per
/// row and layer is drawn; without, the network runs deterministically.
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                MlpGradients* gradients = nullptr, std::mt19937_64* rng = nullptr);

struct MlpTrainResult {
    MlpModel model;
    /// Full-batch training loss at each epoch, before that epoch's update.
    std::vector<double> history;
};

/// Full-batch Adam (0.9, 0.999, 1e-8). Throws SingleClass (fewer than 2 rows in a class),
/// NonFiniteLoss (names the epoch), ShapeMismatch, InvalidSpec.
MlpTrainResult mlp_train(const MlpSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels);

struct SmoteSample {
    std::size_t base = 0;
    std::size_t neighbor = 0;
    double u = 0.0;
};

struct SmoteResult {
    Eigen::MatrixXd samples;
    std::vector<SmoteSample> provenance;
};

/// sample = x + u (x_nn - x). Throws TooFewMinority when rows < k + 1, DomainError for k < 1.
SmoteResult smote(const Eigen::MatrixXd& minority, int k, int n_synthetic, std::uint64_t seed);

struct EvalReport {
    std::int64_t true_positive = 0;
    std::int64_t false_positive = 0;
    std::int64_t false_negative = 0;
    std::int64_t true_negative = 0;
    /// Ratios with a zero denominator are absent.
    std::optional<double> accuracy;
    std::optional<double> precision_pos;
    std::optional<double> precision_neg;
    std::optional<double> recall_pos;
    std::optional<double> f1;

    std::int64_t total() const noexcept { return true_positive + false_positive + false_negative + true_negative; }
};

/// prediction = probability > threshold. Throws LengthMismatch.
EvalReport evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold = 0.5);
/// Counts given directly.
EvalReport evaluate_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn);

/// Column-wise z-scoring with population standard deviation; zero-variance columns map to 0.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

enum class Preset { Cachexia, Recurrence };

struct PresetConfig {
    MlpSpec spec;
    bool use_smote = false;
    int smote_k = 5;
    double train_fraction = 0.85;
};

PresetConfig preset_config(Preset preset, std::uint64_t seed);
/// Throws InvalidSpec for an unknown name.
Preset parse_preset(const std::string& name);

struct PredictorRun {
    CovariateEncoding encoding;
    Standardizer standardizer;
    MlpTrainResult training;
    EvalReport test_report;
    std::size_t train_size = 0;
    std::size_t synthetic_count = 0;
    std::size_t test_size = 0;
};

/// Encodes the covariate columns (time and vital status excluded), splits by seed,
/// standardises, oversamples the training minority when the preset asks, trains, evaluates.
/// Rows must carry a label; throws MalformedData otherwise.
PredictorRun train_preset(const std::vector<CovariateRow>& rows, Preset preset, std::uint64_t seed);

std::string model_to_json(const MlpModel& model);
/// Throws MalformedData.
MlpModel model_from_json(const std::string& text);
std::string eval_report_json(const EvalReport& report);

}  // namespace bodycomp
