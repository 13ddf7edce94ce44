#include "bodycomp/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <numeric>

#include "bodycomp/error.hpp"

namespace bodycomp {

void MlpSpec::validate() const
{
    if (layer_widths.size() != dropout_probs.size())
        throw Error(ErrorKind::InvalidSpec, "layer_widths and dropout_probs differ in length");
    for (int w : layer_widths)
        if (w <= 0)
            throw Error(ErrorKind::InvalidSpec, "hidden widths must be positive");
    for (double p : dropout_probs)
        if (!(p >= 0.0 && p < 1.0))
            throw Error(ErrorKind::InvalidSpec, "dropout probabilities must lie in [0,1)");
    if (epochs <= 0)
        throw Error(ErrorKind::InvalidSpec, "epochs must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error(ErrorKind::InvalidSpec, "learning rate must be positive");
}

namespace {

std::vector<int> layer_shape(const MlpSpec& spec, int input_width)
{
    std::vector<int> widths{input_width};
    widths.insert(widths.end(), spec.layer_widths.begin(), spec.layer_widths.end());
    widths.push_back(1);
    return widths;
}

double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z)
{
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

MlpModel MlpModel::zeros(const MlpSpec& spec, int input_width)
{
    spec.validate();
    if (input_width <= 0)
        throw Error(ErrorKind::ShapeMismatch, "input width must be positive");
    MlpModel model;
    model.spec = spec;
    model.input_width = input_width;
    const auto widths = layer_shape(spec, input_width);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        model.layers.push_back({Eigen::MatrixXd::Zero(widths[l + 1], widths[l]), Eigen::VectorXd::Zero(widths[l + 1])});
    return model;
}

MlpModel MlpModel::initialise(const MlpSpec& spec, int input_width, std::mt19937_64& rng)
{
    MlpModel model = zeros(spec, input_width);
    for (auto& layer : model.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(r, c) = u(rng);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            layer.bias[r] = u(rng);
    }
    return model;
}

namespace {

void check_width(const MlpModel& model, Eigen::Index width)
{
    if (model.layers.empty())
        throw Error(ErrorKind::ShapeMismatch, "model has no layers");
    if (width != model.input_width)
        throw Error(ErrorKind::ShapeMismatch, "feature width " + std::to_string(width) + " but model expects " +
                                                  std::to_string(model.input_width));
}

// Kept activations and masks from a batch forward pass.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer, rows = samples
    std::vector<Eigen::MatrixXd> masks;   // scaled dropout mask (0 or 1/(1-p)) per hidden layer; empty if none
    std::vector<Eigen::MatrixXd> pre;     // pre-activation per hidden layer
    Eigen::VectorXd logits;
};

ForwardTrace forward_batch(const MlpModel& model, const Eigen::MatrixXd& x, std::mt19937_64* rng)
{
    ForwardTrace trace;
    Eigen::MatrixXd a = x;
    const std::size_t hidden = model.layers.size() - 1;
    for (std::size_t l = 0; l < hidden; ++l) {
        const auto& layer = model.layers[l];
        trace.inputs.push_back(a);
        Eigen::MatrixXd z = (a * layer.weights.transpose()).rowwise() + layer.bias.transpose();
        trace.pre.push_back(z);
        a = z.cwiseMax(0.0);
        const double p = model.spec.dropout_probs[l];
        if (rng && p > 0.0) {
            std::bernoulli_distribution keep(1.0 - p);
            Eigen::MatrixXd mask(a.rows(), a.cols());
            const double scale = 1.0 / (1.0 - p);
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    mask(r, c) = keep(*rng) ? scale : 0.0;
            a = a.cwiseProduct(mask);
            trace.masks.push_back(std::move(mask));
        } else {
            trace.masks.emplace_back();
        }
    }
    const auto& out = model.layers.back();
    trace.inputs.push_back(a);
    trace.logits = (a * out.weights.transpose()).col(0).array() + out.bias[0];
    return trace;
}

}  // namespace

double mlp_forward(const MlpModel& model, const Eigen::VectorXd& features, bool training_mode, std::mt19937_64* rng)
{
    check_width(model, features.size());
    if (training_mode != (rng != nullptr))
        throw Error(ErrorKind::DomainError, "an rng must be supplied exactly in training mode");
    const ForwardTrace trace = forward_batch(model, features.transpose(), rng);
    return sigmoid(trace.logits[0]);
}

Eigen::VectorXd mlp_predict(const MlpModel& model, const Eigen::MatrixXd& features)
{
    check_width(model, features.cols());
    const ForwardTrace trace = forward_batch(model, features, nullptr);
    Eigen::VectorXd p(trace.logits.size());
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] = sigmoid(trace.logits[i]);
    return p;
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                MlpGradients* gradients, std::mt19937_64* rng)
{
    check_width(model, features.cols());
    if (labels.size() != features.rows())
        throw Error(ErrorKind::LengthMismatch, "labels and feature rows differ");
    const auto n = static_cast<double>(features.rows());
    const ForwardTrace trace = forward_batch(model, features, rng);

    double loss = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        loss += softplus(trace.logits[i]) - labels[i] * trace.logits[i];
    loss /= n;
    if (!gradients)
        return loss;

    gradients->layers.assign(model.layers.size(), {});
    Eigen::MatrixXd delta(features.rows(), 1);
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        delta(i, 0) = (sigmoid(trace.logits[i]) - labels[i]) / n;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        auto& g = gradients->layers[l];
        g.weights = delta.transpose() * trace.inputs[l];
        g.bias = delta.colwise().sum().transpose();
        if (l == 0)
            break;
        Eigen::MatrixXd back = delta * model.layers[l].weights;
        if (trace.masks[l - 1].size() > 0)
            back = back.cwiseProduct(trace.masks[l - 1]);
        const Eigen::MatrixXd& z = trace.pre[l - 1];
        for (Eigen::Index r = 0; r < back.rows(); ++r)
            for (Eigen::Index c = 0; c < back.cols(); ++c)
                if (z(r, c) <= 0.0)
                    back(r, c) = 0.0;
        delta = std::move(back);
    }
    return loss;
}

MlpTrainResult mlp_train(const MlpSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& labels)
{
    spec.validate();
    if (labels.size() != features.rows())
        throw Error(ErrorKind::LengthMismatch, "labels and feature rows differ");
    int positives = 0, negatives = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1.0)
            ++positives;
        else if (labels[i] == 0.0)
            ++negatives;
        else
            throw Error(ErrorKind::DomainError, "labels must be 0 or 1");
    }
    if (positives < 2 || negatives < 2)
        throw Error(ErrorKind::SingleClass, "training needs at least 2 rows per class (got " +
                                                std::to_string(negatives) + " negative, " + std::to_string(positives) +
                                                " positive)");

    std::mt19937_64 rng(spec.seed);
    MlpTrainResult result;
    result.model = MlpModel::initialise(spec, static_cast<int>(features.cols()), rng);
    auto& model = result.model;

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<DenseLayer> m(model.layers.size()), v(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        m[l] = {Eigen::MatrixXd::Zero(model.layers[l].weights.rows(), model.layers[l].weights.cols()),
                Eigen::VectorXd::Zero(model.layers[l].bias.size())};
        v[l] = m[l];
    }

    const bool any_dropout =
        std::any_of(spec.dropout_probs.begin(), spec.dropout_probs.end(), [](double p) { return p > 0.0; });
    MlpGradients grads;
    double b1t = 1.0, b2t = 1.0;
    for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
        const double loss = mlp_loss(model, features, labels, &grads, any_dropout ? &rng : nullptr);
        if (!std::isfinite(loss))
            throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch));
        result.history.push_back(loss);
        b1t *= beta1;
        b2t *= beta2;
        const double step = spec.learning_rate;
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto update = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
                mom = beta1 * mom + (1.0 - beta1) * grad;
                vel = beta2 * vel + (1.0 - beta2) * grad.cwiseProduct(grad);
                const auto m_hat = mom / (1.0 - b1t);
                const auto v_hat = vel / (1.0 - b2t);
                param.array() -= step * m_hat.array() / (v_hat.array().sqrt() + eps);
            };
            update(model.layers[l].weights, m[l].weights, v[l].weights, grads.layers[l].weights);
            update(model.layers[l].bias, m[l].bias, v[l].bias, grads.layers[l].bias);
        }
    }
    model.trained = true;
    return result;
}

SmoteResult smote(const Eigen::MatrixXd& minority, int k, int n_synthetic, std::uint64_t seed)
{
    if (k < 1)
        throw Error(ErrorKind::DomainError, "SMOTE needs k >= 1");
    if (n_synthetic < 0)
        throw Error(ErrorKind::DomainError, "synthetic count must be >= 0");
    const auto rows = static_cast<std::size_t>(minority.rows());
    if (rows < static_cast<std::size_t>(k) + 1)
        throw Error(ErrorKind::TooFewMinority, "SMOTE with k=" + std::to_string(k) + " needs at least " +
                                                   std::to_string(k + 1) + " minority rows, got " +
                                                   std::to_string(rows));

    // k nearest neighbours of every row, ties broken by index.
    std::vector<std::vector<std::size_t>> neighbours(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t j = 0; j < rows; ++j)
            if (j != i)
                dist.emplace_back((minority.row(static_cast<Eigen::Index>(i)) -
                                   minority.row(static_cast<Eigen::Index>(j))).squaredNorm(),
                                  j);
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        for (int q = 0; q < k; ++q)
            neighbours[i].push_back(dist[static_cast<std::size_t>(q)].second);
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_row(0, rows - 1);
    std::uniform_int_distribution<int> pick_nn(0, k - 1);
    std::uniform_real_distribution<double> pick_u(0.0, 1.0);

    SmoteResult out;
    out.samples.resize(n_synthetic, minority.cols());
    for (int s = 0; s < n_synthetic; ++s) {
        const std::size_t base = pick_row(rng);
        const std::size_t nn = neighbours[base][static_cast<std::size_t>(pick_nn(rng))];
        const double u = pick_u(rng);
        const auto x = minority.row(static_cast<Eigen::Index>(base));
        out.samples.row(s) = x + u * (minority.row(static_cast<Eigen::Index>(nn)) - x);
        out.provenance.push_back({base, nn, u});
    }
    return out;
}

EvalReport evaluate_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn)
{
    EvalReport r;
    r.true_positive = tp;
    r.false_positive = fp;
    r.false_negative = fn;
    r.true_negative = tn;
    const auto ratio = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
        if (den == 0)
            return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = ratio(tp + tn, r.total());
    r.precision_pos = ratio(tp, tp + fp);
    r.precision_neg = ratio(tn, tn + fn);
    r.recall_pos = ratio(tp, tp + fn);
    if (r.precision_pos && r.recall_pos && *r.precision_pos + *r.recall_pos > 0.0)
        r.f1 = 2.0 * *r.precision_pos * *r.recall_pos / (*r.precision_pos + *r.recall_pos);
    return r;
}

EvalReport evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold)
{
    if (probabilities.size() != labels.size())
        throw Error(ErrorKind::LengthMismatch, "evaluate: probabilities and labels differ in length");
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] > threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual)
            ++tp;
        else if (predicted)
            ++fp;
        else if (actual)
            ++fn;
        else
            ++tn;
    }
    return evaluate_counts(tp, fp, fn, tn);
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x)
{
    if (x.rows() == 0)
        throw Error(ErrorKind::EmptyInput, "cannot standardise an empty matrix");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.stddev = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / static_cast<double>(x.rows()))
                   .sqrt()
                   .transpose();
    return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const
{
    if (x.cols() != mean.size())
        throw Error(ErrorKind::ShapeMismatch, "standardiser width mismatch");
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        if (stddev[c] > 0.0)
            out.col(c) = ((x.col(c).array() - mean[c]) / stddev[c]).matrix();
        else
            out.col(c).setZero();
    return out;
}

PresetConfig preset_config(Preset preset, std::uint64_t seed)
{
    PresetConfig c;
    c.spec.seed = seed;
    if (preset == Preset::Cachexia) {
        c.spec.layer_widths = {256, 128, 32};
        c.spec.dropout_probs = {0.2, 0.2, 0.5};
        c.spec.epochs = 50;
        c.spec.learning_rate = 5e-5;
        c.use_smote = false;
    } else {
        c.spec.layer_widths = {64, 32, 16};
        c.spec.dropout_probs = {0.75, 0.5, 0.65};
        c.spec.epochs = 200;
        c.spec.learning_rate = 5e-4;
        c.use_smote = true;
    }
    return c;
}

Preset parse_preset(const std::string& name)
{
    if (name == "cachexia")
        return Preset::Cachexia;
    if (name == "recurrence")
        return Preset::Recurrence;
    throw Error(ErrorKind::InvalidSpec, "unknown preset '" + name + "' (expected cachexia or recurrence)");
}

PredictorRun train_preset(const std::vector<CovariateRow>& rows, Preset preset, std::uint64_t seed)
{
    const PresetConfig config = preset_config(preset, seed);
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!rows[i].label)
            throw Error(ErrorKind::MalformedData, "row " + std::to_string(i + 1) + " has no label");

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto train_n =
        static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(rows.size())));
    std::vector<CovariateRow> train, test;
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < train_n ? train : test).push_back(rows[order[k]]);

    PredictorRun run;
    run.encoding = CovariateEncoding::build(train);
    const Eigen::MatrixXd train_raw = run.encoding.encode(train);
    run.standardizer = Standardizer::fit(train_raw);
    Eigen::MatrixXd x = run.standardizer.transform(train_raw);
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
        y[static_cast<Eigen::Index>(i)] = *train[i].label;
    run.train_size = train.size();

    if (config.use_smote) {
        const Eigen::Index positives = static_cast<Eigen::Index>((y.array() == 1.0).count());
        const Eigen::Index negatives = y.size() - positives;
        const double minority_label = positives < negatives ? 1.0 : 0.0;
        const Eigen::Index deficit = std::abs(positives - negatives);
        if (deficit > 0) {
            Eigen::MatrixXd minority(std::min(positives, negatives), x.cols());
            Eigen::Index r = 0;
            for (Eigen::Index i = 0; i < y.size(); ++i)
                if (y[i] == minority_label)
                    minority.row(r++) = x.row(i);
            const SmoteResult synth = smote(minority, config.smote_k, static_cast<int>(deficit), seed);
            Eigen::MatrixXd grown(x.rows() + deficit, x.cols());
            grown << x, synth.samples;
            Eigen::VectorXd grown_y(y.size() + deficit);
            grown_y << y, Eigen::VectorXd::Constant(deficit, minority_label);
            x = std::move(grown);
            y = std::move(grown_y);
            run.synthetic_count = static_cast<std::size_t>(deficit);
        }
    }

    run.training = mlp_train(config.spec, x, y);
    run.test_size = test.size();
    if (!test.empty()) {
        const Eigen::VectorXd p = mlp_predict(run.training.model, run.standardizer.transform(run.encoding.encode(test)));
        std::vector<int> labels;
        for (const auto& r : test)
            labels.push_back(*r.label);
        run.test_report = evaluate({p.data(), p.data() + p.size()}, labels);
    }
    return run;
}

std::string model_to_json(const MlpModel& model)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                w.push_back(layer.weights(r, c));
        layers.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
    }
    const nlohmann::json doc{
        {"input_width", model.input_width},
        {"trained", model.trained},
        {"spec",
         {{"layer_widths", model.spec.layer_widths},
          {"dropout_probs", model.spec.dropout_probs},
          {"epochs", model.spec.epochs},
          {"learning_rate", model.spec.learning_rate},
          {"seed", model.spec.seed}}},
        {"layers", layers},
    };
    return doc.dump(1) + "\n";
}

MlpModel model_from_json(const std::string& text)
{
    try {
        const auto doc = nlohmann::json::parse(text);
        MlpSpec spec;
        spec.layer_widths = doc.at("spec").at("layer_widths").get<std::vector<int>>();
        spec.dropout_probs = doc.at("spec").at("dropout_probs").get<std::vector<double>>();
        spec.epochs = doc.at("spec").at("epochs").get<int>();
        spec.learning_rate = doc.at("spec").at("learning_rate").get<double>();
        spec.seed = doc.at("spec").at("seed").get<std::uint64_t>();
        MlpModel model = MlpModel::zeros(spec, doc.at("input_width").get<int>());
        const auto& layers = doc.at("layers");
        if (layers.size() != model.layers.size())
            throw Error(ErrorKind::MalformedData, "layer count disagrees with spec");
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto& layer = model.layers[l];
            const auto w = layers[l].at("weights").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            if (layers[l].at("rows").get<Eigen::Index>() != layer.weights.rows() ||
                layers[l].at("cols").get<Eigen::Index>() != layer.weights.cols() ||
                w.size() != static_cast<std::size_t>(layer.weights.size()) ||
                b.size() != static_cast<std::size_t>(layer.bias.size()))
                throw Error(ErrorKind::MalformedData, "layer " + std::to_string(l) + " has the wrong shape");
            for (Eigen::Index r = 0, k = 0; r < layer.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                    layer.weights(r, c) = w[static_cast<std::size_t>(k++)];
            for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
                layer.bias[r] = b[static_cast<std::size_t>(r)];
        }
        model.trained = doc.value("trained", false);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedData, std::string("model JSON: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidSpec || e.kind() == ErrorKind::ShapeMismatch)
            throw Error(ErrorKind::MalformedData, e.what());
        throw;
    }
}

std::string eval_report_json(const EvalReport& r)
{
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    const nlohmann::json doc{
        {"confusion", {{"tp", r.true_positive}, {"fp", r.false_positive}, {"fn", r.false_negative}, {"tn", r.true_negative}}},
        {"accuracy", opt(r.accuracy)},
        {"precision_pos", opt(r.precision_pos)},
        {"precision_neg", opt(r.precision_neg)},
        {"recall_pos", opt(r.recall_pos)},
        {"f1", opt(r.f1)},
    };
    return doc.dump(2) + "\n";
}

}  // namespace bodycomp
