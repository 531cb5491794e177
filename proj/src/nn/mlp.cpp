#include "lobexec/nn/mlp.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

namespace lobexec::nn {

namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::string dim_text(Eigen::Index got, Eigen::Index want) {
  return "got " + std::to_string(got) + ", expected " + std::to_string(want);
}

} // namespace

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) {
    throw DimensionMismatch("an mlp needs at least input and output widths");
  }
  for (int d : dims_) {
    if (d < 1) throw DimensionMismatch("layer widths must be >= 1");
  }
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    layers_.push_back({Matrix::Zero(dims_[i + 1], dims_[i]), Vector::Zero(dims_[i + 1])});
    parameter_count_ += static_cast<std::size_t>(dims_[i + 1]) * static_cast<std::size_t>(dims_[i] + 1);
  }
  version_ = next_version();
}

Layer& Mlp::mutable_layer(std::size_t i) {
  version_ = next_version();
  return layers_.at(i);
}

void Mlp::check_input(Eigen::Index rows) const {
  if (rows != input_dim()) {
    throw DimensionMismatch("mlp input: " + dim_text(rows, input_dim()));
  }
}

Vector Mlp::forward(const Vector& x) const {
  check_input(x.size());
  Vector h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector z = layers_[i].weight * h + layers_[i].bias;
    h = i + 1 < layers_.size() ? Vector(z.array().tanh()) : z;
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x) const {
  check_input(x.rows());
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    h = i + 1 < layers_.size() ? Matrix(z.array().tanh()) : z;
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, ForwardCache& cache) const {
  check_input(x.rows());
  cache.inputs.clear();
  cache.hidden.clear();
  cache.version = version_;
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs.push_back(h);
    Matrix z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) {
      h = z.array().tanh();
      cache.hidden.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Matrix Mlp::backward(const ForwardCache& cache, const Matrix& output_grad, Vector& grads) const {
  if (cache.version != version_ || cache.inputs.size() != layers_.size()) {
    throw StaleCache("backward: cache does not belong to the current parameters");
  }
  const Eigen::Index batch = cache.inputs.front().cols();
  if (output_grad.rows() != output_dim() || output_grad.cols() != batch) {
    throw DimensionMismatch("backward output gradient: " + dim_text(output_grad.rows(), output_dim()) + " rows, " +
                            dim_text(output_grad.cols(), batch) + " columns");
  }
  if (grads.size() != static_cast<Eigen::Index>(parameter_count_)) {
    throw DimensionMismatch("backward gradient buffer: " + dim_text(grads.size(), static_cast<Eigen::Index>(parameter_count_)));
  }
  std::vector<Eigen::Index> offsets(layers_.size());
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = offset;
    offset += layers_[i].weight.size() + layers_[i].bias.size();
  }
  Matrix delta = output_grad;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    if (li + 1 < layers_.size()) {
      delta.array() *= 1.0 - cache.hidden[li].array().square();
    }
    Eigen::Map<Matrix> gw(grads.data() + offsets[li], layer.weight.rows(), layer.weight.cols());
    Eigen::Map<Vector> gb(grads.data() + offsets[li] + layer.weight.size(), layer.bias.size());
    gw.noalias() += delta * cache.inputs[li].transpose();
    gb += delta.rowwise().sum();
    delta = layer.weight.transpose() * delta;
  }
  return delta;
}

Vector Mlp::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count_));
  Eigen::Index o = 0;
  for (const Layer& l : layers_) {
    flat.segment(o, l.weight.size()) = l.weight.reshaped();
    o += l.weight.size();
    flat.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count_)) {
    throw DimensionMismatch("set_parameters: " + dim_text(flat.size(), static_cast<Eigen::Index>(parameter_count_)));
  }
  Eigen::Index o = 0;
  for (Layer& l : layers_) {
    l.weight.reshaped() = flat.segment(o, l.weight.size());
    o += l.weight.size();
    l.bias = flat.segment(o, l.bias.size());
    o += l.bias.size();
  }
  version_ = next_version();
}

bool Mlp::all_finite() const {
  for (const Layer& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

Matrix orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw DimensionMismatch("orthogonal_init needs rows, cols >= 1");
  }
  const bool wide = rows < cols;
  const int n = wide ? cols : rows;
  const int m = wide ? rows : cols;
  Matrix a(n, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, m);
  const Matrix& r = qr.matrixQR();
  for (int j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  q *= gain;
  if (wide) return q.transpose();
  return q;
}

Mlp make_orthogonal_mlp(const std::vector<int>& dims, double hidden_gain, double output_gain,
                        const Vector& output_bias, Rng& rng) {
  Mlp net(dims);
  if (output_bias.size() != net.output_dim()) {
    throw DimensionMismatch("output bias: " + dim_text(output_bias.size(), net.output_dim()));
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const bool last = i + 1 == net.layer_count();
    Layer& l = net.mutable_layer(i);
    l.weight = orthogonal_init(static_cast<int>(l.weight.rows()), static_cast<int>(l.weight.cols()),
                               last ? output_gain : hidden_gain, rng);
    l.bias = last ? output_bias : Vector::Zero(l.bias.size());
  }
  return net;
}

Adam::Adam(std::size_t size, AdamConfig cfg)
    : cfg_(cfg), m_(Vector::Zero(static_cast<Eigen::Index>(size))), v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Vector& params, const Vector& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionMismatch("adam step: " + dim_text(grads.size(), m_.size()));
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

void to_json(nlohmann::json& j, const Adam& a) {
  j = nlohmann::json{{"lr", a.cfg_.lr},     {"beta1", a.cfg_.beta1}, {"beta2", a.cfg_.beta2},
                     {"eps", a.cfg_.eps},   {"t", a.t_},            {"m", to_std(a.m_)},
                     {"v", to_std(a.v_)}};
}

void from_json(const nlohmann::json& j, Adam& a) {
  a.cfg_.lr = j.at("lr").get<double>();
  a.cfg_.beta1 = j.at("beta1").get<double>();
  a.cfg_.beta2 = j.at("beta2").get<double>();
  a.cfg_.eps = j.at("eps").get<double>();
  a.t_ = j.at("t").get<std::int64_t>();
  a.m_ = from_std(j.at("m").get<std::vector<double>>());
  a.v_ = from_std(j.at("v").get<std::vector<double>>());
  if (a.m_.size() != a.v_.size()) {
    throw DimensionMismatch("adam state: moment sizes differ");
  }
}

void to_json(nlohmann::json& j, const Mlp& net) {
  j = nlohmann::json{{"dims", net.dims()}, {"params", to_std(net.parameters())}};
}

void from_json(const nlohmann::json& j, Mlp& net) {
  Mlp loaded(j.at("dims").get<std::vector<int>>());
  loaded.set_parameters(from_std(j.at("params").get<std::vector<double>>()));
  net = std::move(loaded);
}

} // namespace lobexec::nn
