#include "leafarea/area_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "leafarea/image_io.hpp"

namespace leafarea {

using nlohmann::json;
namespace fs = std::filesystem;

void FeatureMap::validate() const {
    require(height > 0 && width > 0, "features: empty spatial extent");
    require(data.rows() >= 1, "features: need at least one channel");
    require(data.cols() == pixels(), "features: data does not match H x W");
    require(data.allFinite(), "features: non-finite entry");
}

void InstanceMask::validate() const {
    require(values.size() == static_cast<Eigen::Index>(height) * width, "mask: size mismatch");
    require(values.allFinite(), "mask: non-finite entry");
    require(values.minCoeff() >= 0.0 && values.maxCoeff() <= 1.0, "mask: values must lie in [0, 1]");
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "leaky_relu") return Activation::LeakyRelu;
    fail(ErrorKind::InvalidArgument, "unknown activation '" + name + "'");
}

const char* activation_name(Activation a) { return a == Activation::Relu ? "relu" : "leaky_relu"; }

LossKind parse_loss(const std::string& name) {
    if (name == "l1") return LossKind::L1;
    if (name == "mse") return LossKind::Mse;
    if (name == "huber") return LossKind::Huber;
    fail(ErrorKind::InvalidArgument, "unknown loss '" + name + "'");
}

const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::L1: return "l1";
        case LossKind::Mse: return "mse";
        case LossKind::Huber: return "huber";
    }
    return "l1";
}

void AreaHeadParams::validate() const {
    require(n_layers() >= 1, "area head: need at least one conv layer");
    for (int k = 0; k < n_layers(); ++k) {
        const Eigen::MatrixXd& w = conv_weights[k];
        require(w.rows() >= 1 && w.cols() >= 1, "area head: empty conv kernel");
        if (k > 0)
            require(w.rows() == conv_weights[k - 1].cols(),
                    "area head: layer " + std::to_string(k) + " input width does not match");
        require(w.allFinite(), "area head: non-finite weight");
        if (!identity_mode) {
            require(norm_groups >= 1 && w.cols() % norm_groups == 0,
                    "area head: norm_groups must divide every layer width");
            require(static_cast<int>(norm_scale.size()) == n_layers() &&
                        static_cast<int>(norm_shift.size()) == n_layers(),
                    "area head: one norm scale/shift per layer required");
            require(norm_scale[k].size() == w.cols() && norm_shift[k].size() == w.cols(),
                    "area head: norm parameters do not match layer width");
        }
    }
    require(pred_weight.size() == conv_weights.back().cols(),
            "area head: pred weight does not match last layer width");
    require(huber_delta > 0, "area head: huber delta must be > 0");
    require(norm_eps > 0, "area head: norm eps must be > 0");
}

AreaHeadParams random_area_head(const std::vector<int>& widths, std::uint64_t seed) {
    require(widths.size() >= 2, "random_area_head: need at least two widths");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    AreaHeadParams p;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        Eigen::MatrixXd w(widths[k], widths[k + 1]);
        const double s = 1.0 / std::sqrt(static_cast<double>(widths[k]));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * normal(rng);
        p.conv_weights.push_back(w);
        p.norm_scale.push_back(Eigen::VectorXd::Ones(widths[k + 1]));
        p.norm_shift.push_back(Eigen::VectorXd::Zero(widths[k + 1]));
    }
    p.pred_weight.resize(widths.back());
    const double s = 1.0 / std::sqrt(static_cast<double>(widths.back()));
    for (Eigen::Index i = 0; i < p.pred_weight.size(); ++i) p.pred_weight[i] = s * normal(rng);
    return p;
}

namespace {

struct LayerCache {
    Eigen::MatrixXd input;    // F_k
    Eigen::MatrixXd zhat;     // normalized conv output (support columns)
    Eigen::VectorXd inv_std;  // per group
    Eigen::MatrixXd pre;      // activation input
};

struct ForwardState {
    std::vector<int> support;
    std::vector<LayerCache> layers;
    Eigen::MatrixXd last;     // F_n
    Eigen::RowVectorXd u;     // pred conv output before the final relu
    AreaHeadOutput out;
};

double activate(double x, Activation a) {
    if (x > 0) return x;
    return a == Activation::Relu ? 0.0 : kLeakySlope * x;
}

double activate_slope(double x, Activation a) {
    if (x > 0) return 1.0;
    return a == Activation::Relu ? 0.0 : kLeakySlope;
}

int sign_of(double x) { return (x > 0) - (x < 0); }

void check_inputs(const FeatureMap& f, const InstanceMask& m, const AreaHeadParams& p) {
    f.validate();
    m.validate();
    p.validate();
    if (f.height != m.height || f.width != m.width)
        fail(ErrorKind::InvalidArgument, "area head: mask dimensions do not match features");
    if (f.channels() != p.conv_weights.front().rows())
        fail(ErrorKind::InvalidArgument, "area head: feature channels do not match first layer");
}

ForwardState run_forward(const FeatureMap& features, const InstanceMask& mask,
                         const AreaHeadParams& p) {
    ForwardState st;
    const int P = features.pixels();
    for (int i = 0; i < P; ++i)
        if (mask.values[i] > 0) st.support.push_back(i);

    Eigen::MatrixXd f = features.data.array().rowwise() * mask.values.array();
    for (int k = 0; k < p.n_layers(); ++k) {
        LayerCache lc;
        lc.input = f;
        const Eigen::MatrixXd z = p.conv_weights[k].transpose() * f;
        const int c_out = static_cast<int>(z.rows());
        lc.pre = Eigen::MatrixXd::Zero(c_out, P);
        if (p.identity_mode) {
            for (int i : st.support) lc.pre.col(i) = z.col(i);
        } else if (!st.support.empty()) {
            const int groups = p.norm_groups, per = c_out / groups;
            const double count = static_cast<double>(per) * st.support.size();
            lc.zhat = Eigen::MatrixXd::Zero(c_out, P);
            lc.inv_std.resize(groups);
            for (int g = 0; g < groups; ++g) {
                double mean = 0;
                for (int i : st.support) mean += z.col(i).segment(g * per, per).sum();
                mean /= count;
                double var = 0;
                for (int i : st.support)
                    var += (z.col(i).segment(g * per, per).array() - mean).square().sum();
                var /= count;
                const double inv = 1.0 / std::sqrt(var + p.norm_eps);
                lc.inv_std[g] = inv;
                for (int i : st.support)
                    lc.zhat.col(i).segment(g * per, per) =
                        (z.col(i).segment(g * per, per).array() - mean) * inv;
            }
            for (int i : st.support)
                lc.pre.col(i) = lc.zhat.col(i).cwiseProduct(p.norm_scale[k]) + p.norm_shift[k];
        }
        f = lc.pre.unaryExpr([&](double x) { return activate(x, p.activation); });
        st.layers.push_back(std::move(lc));
    }
    st.last = f;
    st.u = p.pred_weight.transpose() * f;
    st.out.map = st.u.unaryExpr([](double x) { return x > 0 ? x : 0.0; });
    st.out.area = st.out.map.sum();
    return st;
}

// Signs of every kinked quantity; a finite-difference step that changes any
// of them straddles a non-differentiable point.
std::vector<int> kink_pattern(const ForwardState& st, const AreaHeadParams& p, double gt) {
    std::vector<int> signs;
    for (const LayerCache& lc : st.layers)
        for (int i : st.support)
            for (Eigen::Index c = 0; c < lc.pre.rows(); ++c) signs.push_back(sign_of(lc.pre(c, i)));
    for (int i : st.support) signs.push_back(sign_of(st.u[i]));
    if (p.loss == LossKind::L1) signs.push_back(sign_of(st.out.area - gt));
    return signs;
}

}  // namespace

AreaHeadOutput area_head_forward(const FeatureMap& features, const InstanceMask& mask,
                                 const AreaHeadParams& params) {
    check_inputs(features, mask, params);
    return run_forward(features, mask, params).out;
}

double area_loss(double pred, double gt, LossKind kind, double huber_delta) {
    require(gt >= 0, "area_loss: ground truth must be >= 0 (unknown areas must be filtered)");
    const double r = pred - gt;
    switch (kind) {
        case LossKind::L1: return std::abs(r);
        case LossKind::Mse: return r * r;
        case LossKind::Huber:
            require(huber_delta > 0, "area_loss: huber delta must be > 0");
            return std::abs(r) <= huber_delta ? 0.5 * r * r
                                              : huber_delta * (std::abs(r) - 0.5 * huber_delta);
    }
    return 0;
}

double area_loss_derivative(double pred, double gt, LossKind kind, double huber_delta) {
    require(gt >= 0, "area_loss: ground truth must be >= 0 (unknown areas must be filtered)");
    const double r = pred - gt;
    switch (kind) {
        case LossKind::L1: return static_cast<double>(sign_of(r));
        case LossKind::Mse: return 2.0 * r;
        case LossKind::Huber: return std::abs(r) <= huber_delta ? r : huber_delta * sign_of(r);
    }
    return 0;
}

LossAndGradients area_head_backward(const FeatureMap& features, const InstanceMask& mask,
                                    const AreaHeadParams& p, double gt) {
    check_inputs(features, mask, p);
    const ForwardState st = run_forward(features, mask, p);
    LossAndGradients res;
    res.area = st.out.area;
    res.loss = area_loss(st.out.area, gt, p.loss, p.huber_delta);
    const double dl = area_loss_derivative(st.out.area, gt, p.loss, p.huber_delta);

    const int P = features.pixels();
    Eigen::RowVectorXd gu = Eigen::RowVectorXd::Zero(P);
    for (int i = 0; i < P; ++i)
        if (st.u[i] > 0) gu[i] = dl;
    res.grads.pred_weight = st.last * gu.transpose();
    Eigen::MatrixXd gf = p.pred_weight * gu;

    const int n = p.n_layers();
    res.grads.conv_weights.resize(n);
    res.grads.norm_scale.resize(n);
    res.grads.norm_shift.resize(n);
    for (int k = n - 1; k >= 0; --k) {
        const LayerCache& lc = st.layers[k];
        const int c_out = static_cast<int>(lc.pre.rows());
        Eigen::MatrixXd gpre = Eigen::MatrixXd::Zero(c_out, P);
        for (int i : st.support)
            for (int c = 0; c < c_out; ++c)
                gpre(c, i) = gf(c, i) * activate_slope(lc.pre(c, i), p.activation);

        Eigen::MatrixXd gz = Eigen::MatrixXd::Zero(c_out, P);
        res.grads.norm_scale[k] = Eigen::VectorXd::Zero(c_out);
        res.grads.norm_shift[k] = Eigen::VectorXd::Zero(c_out);
        if (p.identity_mode) {
            gz = gpre;
        } else if (!st.support.empty()) {
            const int groups = p.norm_groups, per = c_out / groups;
            const double count = static_cast<double>(per) * st.support.size();
            Eigen::MatrixXd gzhat = Eigen::MatrixXd::Zero(c_out, P);
            for (int i : st.support) {
                res.grads.norm_scale[k] += gpre.col(i).cwiseProduct(lc.zhat.col(i));
                res.grads.norm_shift[k] += gpre.col(i);
                gzhat.col(i) = gpre.col(i).cwiseProduct(p.norm_scale[k]);
            }
            for (int g = 0; g < groups; ++g) {
                double mean_g = 0, mean_gx = 0;
                for (int i : st.support) {
                    mean_g += gzhat.col(i).segment(g * per, per).sum();
                    mean_gx += gzhat.col(i).segment(g * per, per).dot(lc.zhat.col(i).segment(g * per, per));
                }
                mean_g /= count;
                mean_gx /= count;
                for (int i : st.support)
                    gz.col(i).segment(g * per, per) =
                        lc.inv_std[g] * (gzhat.col(i).segment(g * per, per).array() - mean_g -
                                         lc.zhat.col(i).segment(g * per, per).array() * mean_gx)
                                            .matrix();
            }
        }
        res.grads.conv_weights[k] = lc.input * gz.transpose();
        gf = p.conv_weights[k] * gz;
    }
    return res;
}

GradCheckResult grad_check(const AreaHeadParams& params, const FeatureMap& features,
                           const InstanceMask& mask, double gt, double h) {
    require(h > 0, "grad_check: step must be > 0");
    const LossAndGradients analytic = area_head_backward(features, mask, params, gt);
    AreaHeadParams work = params;

    struct Slot {
        double* value;
        double grad;
        std::string name;
    };
    std::vector<Slot> slots;
    for (int k = 0; k < work.n_layers(); ++k) {
        Eigen::MatrixXd& w = work.conv_weights[k];
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                slots.push_back({&w(r, c), analytic.grads.conv_weights[k](r, c),
                                 "conv" + std::to_string(k) + "[" + std::to_string(r) + "," +
                                     std::to_string(c) + "]"});
        if (!work.identity_mode) {
            for (Eigen::Index c = 0; c < work.norm_scale[k].size(); ++c) {
                slots.push_back({&work.norm_scale[k][c], analytic.grads.norm_scale[k][c],
                                 "gamma" + std::to_string(k) + "[" + std::to_string(c) + "]"});
                slots.push_back({&work.norm_shift[k][c], analytic.grads.norm_shift[k][c],
                                 "beta" + std::to_string(k) + "[" + std::to_string(c) + "]"});
            }
        }
    }
    for (Eigen::Index c = 0; c < work.pred_weight.size(); ++c)
        slots.push_back({&work.pred_weight[c], analytic.grads.pred_weight[c],
                         "pred[" + std::to_string(c) + "]"});

    const std::vector<int> base = kink_pattern(run_forward(features, mask, work), work, gt);
    GradCheckResult res;
    for (const Slot& s : slots) {
        const double orig = *s.value;
        *s.value = orig + h;
        const ForwardState plus = run_forward(features, mask, work);
        *s.value = orig - h;
        const ForwardState minus = run_forward(features, mask, work);
        *s.value = orig;
        if (kink_pattern(plus, work, gt) != base || kink_pattern(minus, work, gt) != base) {
            ++res.excluded;
            continue;
        }
        const double numeric = (area_loss(plus.out.area, gt, work.loss, work.huber_delta) -
                                area_loss(minus.out.area, gt, work.loss, work.huber_delta)) /
                               (2.0 * h);
        if (!std::isfinite(numeric) || !std::isfinite(s.grad))
            fail(ErrorKind::Numeric, "grad_check: non-finite gradient for " + s.name);
        const double rel =
            std::abs(s.grad - numeric) / std::max({std::abs(s.grad), std::abs(numeric), 1e-6});
        ++res.checked;
        if (res.worst_parameter.empty() || rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_parameter = s.name;
        }
    }
    return res;
}

namespace {

std::vector<double> flatten(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string area_head_to_json(const AreaHeadParams& p) {
    json doc;
    doc["activation"] = activation_name(p.activation);
    doc["norm_groups"] = p.norm_groups;
    doc["identity_mode"] = p.identity_mode;
    doc["loss"] = loss_name(p.loss);
    doc["huber_delta"] = p.huber_delta;
    doc["norm_eps"] = p.norm_eps;
    doc["layers"] = json::array();
    for (int k = 0; k < p.n_layers(); ++k) {
        json layer;
        layer["in"] = p.conv_weights[k].rows();
        layer["out"] = p.conv_weights[k].cols();
        layer["weight"] = flatten(p.conv_weights[k]);
        if (k < static_cast<int>(p.norm_scale.size())) layer["gamma"] = to_vector(p.norm_scale[k]);
        if (k < static_cast<int>(p.norm_shift.size())) layer["beta"] = to_vector(p.norm_shift[k]);
        doc["layers"].push_back(std::move(layer));
    }
    doc["pred_weight"] = to_vector(p.pred_weight);
    return doc.dump(1);
}

AreaHeadParams area_head_from_json(const std::string& text) {
    AreaHeadParams p;
    try {
        const json doc = json::parse(text);
        if (doc.contains("activation")) p.activation = parse_activation(doc["activation"].get<std::string>());
        if (doc.contains("norm_groups")) p.norm_groups = doc["norm_groups"].get<int>();
        if (doc.contains("identity_mode")) p.identity_mode = doc["identity_mode"].get<bool>();
        if (doc.contains("loss")) p.loss = parse_loss(doc["loss"].get<std::string>());
        if (doc.contains("huber_delta")) p.huber_delta = doc["huber_delta"].get<double>();
        if (doc.contains("norm_eps")) p.norm_eps = doc["norm_eps"].get<double>();
        for (const json& layer : doc.at("layers")) {
            const int in = layer.at("in").get<int>(), out = layer.at("out").get<int>();
            const auto w = layer.at("weight").get<std::vector<double>>();
            if (in < 1 || out < 1 || w.size() != static_cast<std::size_t>(in) * out)
                fail(ErrorKind::Format, "weights: layer kernel size does not match in x out");
            Eigen::MatrixXd m(in, out);
            for (int r = 0; r < in; ++r)
                for (int c = 0; c < out; ++c) m(r, c) = w[static_cast<std::size_t>(r) * out + c];
            p.conv_weights.push_back(m);
            p.norm_scale.push_back(layer.contains("gamma")
                                       ? from_vector(layer["gamma"].get<std::vector<double>>())
                                       : Eigen::VectorXd::Ones(out));
            p.norm_shift.push_back(layer.contains("beta")
                                       ? from_vector(layer["beta"].get<std::vector<double>>())
                                       : Eigen::VectorXd::Zero(out));
        }
        p.pred_weight = from_vector(doc.at("pred_weight").get<std::vector<double>>());
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("weights: ") + e.what());
    }
    try {
        p.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Format, e.what());
    }
    return p;
}

AreaHeadParams load_area_head(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open weights " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return area_head_from_json(ss.str());
}

void save_area_head(const AreaHeadParams& params, const fs::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << area_head_to_json(params) << '\n';
}

namespace {

struct NpyArray {
    std::vector<int> shape;
    std::vector<double> values;
};

NpyArray read_npy(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        fail(ErrorKind::Format, path.string() + ": not a .npy file");
    std::size_t header_len = 0;
    if (magic[6] == 1) {
        unsigned char b[2];
        in.read(reinterpret_cast<char*>(b), 2);
        header_len = b[0] | (b[1] << 8);
    } else {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::size_t>(b[3]) << 24);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated header");

    auto field = [&](const std::string& key) {
        const auto pos = header.find("'" + key + "'");
        if (pos == std::string::npos) fail(ErrorKind::Format, path.string() + ": header lacks " + key);
        return header.substr(header.find(':', pos) + 1);
    };
    const std::string descr = field("descr");
    const bool f4 = descr.find("<f4") != std::string::npos;
    const bool f8 = descr.find("<f8") != std::string::npos;
    if (!f4 && !f8) fail(ErrorKind::Format, path.string() + ": only little-endian f4/f8 supported");
    const std::string order = field("fortran_order");
    if (order.substr(0, order.find(',')).find("True") != std::string::npos)
        fail(ErrorKind::Format, path.string() + ": Fortran order not supported");
    const std::string shape_text = field("shape");
    NpyArray arr;
    {
        const auto open = shape_text.find('('), close = shape_text.find(')');
        std::stringstream ss(shape_text.substr(open + 1, close - open - 1));
        for (std::string tok; std::getline(ss, tok, ',');) {
            tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
            if (!tok.empty()) arr.shape.push_back(std::stoi(tok));
        }
    }
    std::size_t count = 1;
    for (int d : arr.shape) count *= static_cast<std::size_t>(d);
    arr.values.resize(count);
    if (f4) {
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
        std::copy(buf.begin(), buf.end(), arr.values.begin());
    } else {
        in.read(reinterpret_cast<char*>(arr.values.data()), static_cast<std::streamsize>(count * 8));
    }
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated data");
    return arr;
}

}  // namespace

FeatureMap load_features(const fs::path& path, const std::optional<std::vector<int>>& shape) {
    std::vector<int> dims;
    std::vector<double> values;
    if (path.extension() == ".npy") {
        NpyArray arr = read_npy(path);
        dims = arr.shape;
        values = std::move(arr.values);
        if (shape && *shape != dims) fail(ErrorKind::Format, "features: shape differs from --shape");
    } else {
        if (!shape) fail(ErrorKind::InvalidArgument, "features: raw float32 input needs a C,H,W shape");
        dims = *shape;
        std::size_t count = 1;
        for (int d : dims) count *= static_cast<std::size_t>(std::max(d, 0));
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
        if (static_cast<std::size_t>(in.tellg()) != count * 4)
            fail(ErrorKind::Format, "features: file size does not match shape");
        in.seekg(0);
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
        values.assign(buf.begin(), buf.end());
    }
    if (dims.size() == 2) dims.insert(dims.begin(), 1);
    if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        fail(ErrorKind::Format, "features: expected shape (C,H,W) or (H,W)");
    FeatureMap f;
    f.height = dims[1];
    f.width = dims[2];
    f.data.resize(dims[0], f.pixels());
    for (int c = 0; c < dims[0]; ++c)
        for (int i = 0; i < f.pixels(); ++i)
            f.data(c, i) = values[static_cast<std::size_t>(c) * f.pixels() + i];
    f.validate();
    return f;
}

InstanceMask load_instance_mask(const fs::path& path) {
    InstanceMask m;
    if (path.extension() == ".npy") {
        NpyArray arr = read_npy(path);
        if (arr.shape.size() != 2) fail(ErrorKind::Format, "mask: expected shape (H,W)");
        m.height = arr.shape[0];
        m.width = arr.shape[1];
        m.values = Eigen::Map<Eigen::RowVectorXd>(arr.values.data(), static_cast<Eigen::Index>(arr.values.size()));
    } else {
        const auto img = read_gray8_png(path);
        m.height = img.height();
        m.width = img.width();
        m.values.resize(static_cast<Eigen::Index>(img.size()));
        for (std::size_t i = 0; i < img.size(); ++i) m.values[static_cast<Eigen::Index>(i)] = img.data()[i] / 255.0;
    }
    m.validate();
    return m;
}

}  // namespace leafarea
