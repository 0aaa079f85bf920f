#include "crisisfilter/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "crisisfilter/detail/byteio.hpp"
#include "crisisfilter/netpbm.hpp"

namespace crisisfilter {

int ClassifierModel::class_index(const std::string& name) const
{
    const auto it = std::find(classes.begin(), classes.end(), name);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

namespace {

void softmax_inplace(std::span<double> z)
{
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (auto& v : z) {
        v /= sum;
    }
}

void check_dataset(std::span<const Sample> data, const std::vector<std::string>& classes)
{
    if (classes.size() < 2) {
        throw std::invalid_argument("train: need at least two classes");
    }
    if (data.empty()) {
        throw std::invalid_argument("train: empty dataset");
    }
    const std::size_t dim = data.front().x.size();
    std::vector<int> counts(classes.size(), 0);
    for (const auto& s : data) {
        if (s.label < 0 || s.label >= static_cast<int>(classes.size())) {
            throw std::invalid_argument("train: label outside class list");
        }
        if (s.x.size() != dim) {
            throw std::invalid_argument("train: inconsistent feature dimension");
        }
        for (double v : s.x) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("train: non-finite feature value");
            }
        }
        ++counts[s.label];
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (counts[c] < 2) {
            throw std::invalid_argument("train: class '" + classes[c] + "' has fewer than 2 examples");
        }
    }
}

}  // namespace

DesignMatrix design_matrix(std::span<const Sample> data, std::span<const double> mean, std::span<const double> scale)
{
    DesignMatrix m;
    m.rows = static_cast<int>(data.size());
    m.cols = static_cast<int>(mean.size()) + 1;
    m.x.reserve(static_cast<std::size_t>(m.rows) * m.cols);
    m.y.reserve(data.size());
    for (const auto& s : data) {
        for (std::size_t j = 0; j < mean.size(); ++j) {
            m.x.push_back((s.x[j] - mean[j]) / scale[j]);
        }
        m.x.push_back(1.0);
        m.y.push_back(s.label);
    }
    return m;
}

double softmax_loss(const DesignMatrix& m, std::span<const double> weights, int n_classes, double lambda,
                    std::vector<double>* grad)
{
    const int cols = m.cols;
    if (grad != nullptr) {
        grad->assign(weights.size(), 0.0);
    }
    std::vector<double> z(n_classes);
    double loss = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        const double* xi = m.row(i);
        for (int k = 0; k < n_classes; ++k) {
            const double* wk = weights.data() + static_cast<std::size_t>(k) * cols;
            double acc = 0.0;
            for (int j = 0; j < cols; ++j) {
                acc += wk[j] * xi[j];
            }
            z[k] = acc;
        }
        softmax_inplace(z);
        loss -= std::log(std::max(z[m.y[i]], 1e-300));
        if (grad != nullptr) {
            z[m.y[i]] -= 1.0;
            for (int k = 0; k < n_classes; ++k) {
                double* gk = grad->data() + static_cast<std::size_t>(k) * cols;
                const double r = z[k];
                for (int j = 0; j < cols; ++j) {
                    gk[j] += r * xi[j];
                }
            }
        }
    }
    const double inv_n = 1.0 / m.rows;
    loss *= inv_n;
    double penalty = 0.0;
    for (int k = 0; k < n_classes; ++k) {
        for (int j = 0; j + 1 < cols; ++j) {
            const double w = weights[static_cast<std::size_t>(k) * cols + j];
            penalty += w * w;
        }
    }
    loss += lambda * penalty;
    if (grad != nullptr) {
        for (int k = 0; k < n_classes; ++k) {
            for (int j = 0; j < cols; ++j) {
                auto& g = (*grad)[static_cast<std::size_t>(k) * cols + j];
                g *= inv_n;
                if (j + 1 < cols) {
                    g += 2.0 * lambda * weights[static_cast<std::size_t>(k) * cols + j];
                }
            }
        }
    }
    return loss;
}

ClassifierModel train(std::span<const Sample> data, const std::vector<std::string>& classes,
                      const TrainParams& params, const EpochCallback& on_epoch)
{
    check_dataset(data, classes);
    if (params.epochs < 0 || params.decay_every < 1 || !(params.learning_rate > 0.0)) {
        throw std::invalid_argument("train: invalid hyperparameters");
    }

    ClassifierModel model;
    model.classes = classes;
    model.dim = static_cast<int>(data.front().x.size());
    model.meta = params;
    model.mean.assign(model.dim, 0.0);
    model.scale.assign(model.dim, 0.0);
    const double n = static_cast<double>(data.size());
    for (const auto& s : data) {
        for (int j = 0; j < model.dim; ++j) {
            model.mean[j] += s.x[j] / n;
        }
    }
    for (const auto& s : data) {
        for (int j = 0; j < model.dim; ++j) {
            const double d = s.x[j] - model.mean[j];
            model.scale[j] += d * d / n;
        }
    }
    for (auto& s : model.scale) {
        s = std::sqrt(s);
        if (!(s > 1e-12)) {
            s = 1.0;
        }
    }

    const int k = static_cast<int>(classes.size());
    const DesignMatrix m = design_matrix(data, model.mean, model.scale);
    model.weights.assign(static_cast<std::size_t>(k) * m.cols, 0.0);
    std::vector<double> grad;
    double lr = params.learning_rate;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        if (epoch > 0 && epoch % params.decay_every == 0) {
            lr *= params.decay;
        }
        softmax_loss(m, model.weights, k, params.lambda, &grad);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            model.weights[i] -= lr * grad[i];
        }
        if (on_epoch) {
            on_epoch(epoch + 1, model);
        }
    }
    return model;
}

std::vector<double> score(const ClassifierModel& m, std::span<const double> features)
{
    if (static_cast<int>(features.size()) != m.dim) {
        throw std::invalid_argument("score: feature dimension " + std::to_string(features.size()) +
                                    " does not match model dimension " + std::to_string(m.dim));
    }
    const int k = static_cast<int>(m.classes.size());
    std::vector<double> z(k, 0.0);
    for (int c = 0; c < k; ++c) {
        double acc = m.weight(c, m.dim);
        for (int j = 0; j < m.dim; ++j) {
            acc += m.weight(c, j) * ((features[j] - m.mean[j]) / m.scale[j]);
        }
        z[c] = acc;
    }
    softmax_inplace(z);
    return z;
}

int predict(const ClassifierModel& m, std::span<const double> features)
{
    const auto p = score(m, features);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

constexpr char kModelMagic[4] = {'C', 'F', 'L', 'M'};
constexpr std::uint32_t kModelVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    ModelFormatError(const std::string& what, std::size_t offset)
        : std::runtime_error("model file: " + what + " at byte " + std::to_string(offset))
    {
    }
};

}  // namespace

// Layout (little-endian): "CFLM", u32 version, u32 n_classes, n_classes x
// str16, str16 feature id, u32 dim, dim x f64 mean, dim x f64 scale,
// n_classes*(dim+1) x f64 weights, u64 seed, u32 epochs, f64 lambda,
// f64 learning rate, f64 decay, u32 decay_every.
std::vector<std::uint8_t> encode_model(const ClassifierModel& m)
{
    using namespace detail;
    std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
    put_le(out, kModelVersion);
    put_le(out, static_cast<std::uint32_t>(m.classes.size()));
    for (const auto& c : m.classes) {
        put_str16(out, c);
    }
    put_str16(out, m.feature_id);
    put_le(out, static_cast<std::uint32_t>(m.dim));
    for (double v : m.mean) {
        put_f64(out, v);
    }
    for (double v : m.scale) {
        put_f64(out, v);
    }
    for (double v : m.weights) {
        put_f64(out, v);
    }
    put_le(out, m.meta.seed);
    put_le(out, static_cast<std::uint32_t>(m.meta.epochs));
    put_f64(out, m.meta.lambda);
    put_f64(out, m.meta.learning_rate);
    put_f64(out, m.meta.decay);
    put_le(out, static_cast<std::uint32_t>(m.meta.decay_every));
    return out;
}

ClassifierModel decode_model(std::span<const std::uint8_t> bytes)
{
    detail::ByteCursor<ModelFormatError> in(bytes);
    if (in.get_string(4, "magic") != std::string(kModelMagic, 4)) {
        throw ModelFormatError("bad magic", 0);
    }
    if (const auto v = in.get_le<std::uint32_t>("version"); v != kModelVersion) {
        throw ModelFormatError("unsupported version " + std::to_string(v), 4);
    }
    ClassifierModel m;
    const auto n_classes = in.get_le<std::uint32_t>("class count");
    if (n_classes < 2 || n_classes > 1024) {
        throw ModelFormatError("implausible class count", in.pos() - 4);
    }
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        m.classes.push_back(in.get_str16("class name"));
    }
    m.feature_id = in.get_str16("feature id");
    m.dim = static_cast<int>(in.get_le<std::uint32_t>("dimension"));
    const std::size_t n_weights = static_cast<std::size_t>(n_classes) * (m.dim + 1);
    in.need((2 * static_cast<std::size_t>(m.dim) + n_weights) * 8, "parameters");
    for (int j = 0; j < m.dim; ++j) {
        m.mean.push_back(in.get_f64("mean"));
    }
    for (int j = 0; j < m.dim; ++j) {
        m.scale.push_back(in.get_f64("scale"));
    }
    for (std::size_t i = 0; i < n_weights; ++i) {
        m.weights.push_back(in.get_f64("weights"));
    }
    m.meta.seed = in.get_le<std::uint64_t>("seed");
    m.meta.epochs = static_cast<int>(in.get_le<std::uint32_t>("epochs"));
    m.meta.lambda = in.get_f64("lambda");
    m.meta.learning_rate = in.get_f64("learning rate");
    m.meta.decay = in.get_f64("decay");
    m.meta.decay_every = static_cast<int>(in.get_le<std::uint32_t>("decay interval"));
    if (in.remaining() != 0) {
        throw ModelFormatError("trailing bytes", in.pos());
    }
    return m;
}

void save_model(const ClassifierModel& m, const std::filesystem::path& path)
{
    const auto bytes = encode_model(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write model " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ClassifierModel load_model(const std::filesystem::path& path)
{
    return decode_model(read_file_bytes(path));
}

}  // namespace crisisfilter
