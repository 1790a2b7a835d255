#include "noisylab/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "noisylab/kernels.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

MlpModel::MlpModel(std::vector<int> dims, uint64_t seed) : dims_(std::move(dims)) {
  require(dims_.size() == 3, "MlpModel: layer_dims must be {input, hidden, classes}");
  for (int d : dims_) require(d > 0, "MlpModel: layer dims must be positive");
  const size_t d = dims_[0], h = dims_[1], c = dims_[2];
  b1_offset_ = d * h;
  w2_offset_ = b1_offset_ + h;
  b2_offset_ = w2_offset_ + h * c;
  params_.resize(b2_offset_ + c);

  rng::Engine gen(seed);
  auto init = [&](size_t begin, size_t end, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t i = begin; i < end; ++i) {
      params_[i] = bound * (2.0 * rng::uniform01(gen) - 1.0);
    }
  };
  init(0, w2_offset_, dims_[0]);          // W1, b1: fan_in = D
  init(w2_offset_, params_.size(), dims_[1]);  // W2, b2: fan_in = H
}

ForwardRecord forward(const MlpModel& model, const Matrix& batch) {
  require(batch.cols() == model.input_dim(), "forward: batch width " +
                                                 std::to_string(batch.cols()) + " != input dim " +
                                                 std::to_string(model.input_dim()));
  const int b = batch.rows();
  const int h = model.hidden_dim();
  const int c = model.num_classes();
  const auto& ops = kernels::active();

  ForwardRecord rec;
  rec.input = batch;

  rec.hidden = Matrix(b, h);
  for (int i = 0; i < b; ++i) {
    std::memcpy(rec.hidden.row(i).data(), model.b1_data(), sizeof(double) * h);
  }
  ops.matmul_nn(batch.data(), model.w1_data(), rec.hidden.data(), b, model.input_dim(), h);
  for (double& v : rec.hidden.flat()) v = v > 0.0 ? v : 0.0;

  rec.logits = Matrix(b, c);
  for (int i = 0; i < b; ++i) {
    std::memcpy(rec.logits.row(i).data(), model.b2_data(), sizeof(double) * c);
  }
  ops.matmul_nn(rec.hidden.data(), model.w2_data(), rec.logits.data(), b, h, c);

  rec.probs = Matrix(b, c);
  for (int i = 0; i < b; ++i) {
    auto z = rec.logits.row(i);
    auto p = rec.probs.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      p[j] = std::exp(z[j] - zmax);
      denom += p[j];
    }
    for (int j = 0; j < c; ++j) p[j] /= denom;
  }
  return rec;
}

std::vector<int> predict(const MlpModel& model, const Matrix& features, int batch_size) {
  require(batch_size > 0, "predict: batch_size must be positive");
  const int n = features.rows();
  std::vector<int> out(n);
  Matrix buf;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    buf = Matrix(b, features.cols());
    std::memcpy(buf.data(), features.data() + static_cast<size_t>(start) * features.cols(),
                sizeof(double) * buf.size());
    const ForwardRecord rec = forward(model, buf);
    for (int i = 0; i < b; ++i) {
      auto p = rec.probs.row(i);
      int best = 0;
      for (int j = 1; j < model.num_classes(); ++j) {
        if (p[j] > p[best]) best = j;
      }
      out[start + i] = best;
    }
  }
  return out;
}

std::vector<double> backward(const MlpModel& model, const ForwardRecord& record,
                             const Matrix& dloss_dlogits) {
  require(dloss_dlogits.rows() == record.batch() && dloss_dlogits.cols() == model.num_classes(),
          "backward: logit-gradient shape mismatch");
  require(record.input.cols() == model.input_dim(), "backward: record/model mismatch");

  const int b = record.batch();
  const int d = model.input_dim();
  const int h = model.hidden_dim();
  const int c = model.num_classes();
  const auto& ops = kernels::active();

  std::vector<double> grad(static_cast<size_t>(model.param_count()), 0.0);
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + static_cast<size_t>(d) * h;
  double* g_w2 = g_b1 + h;
  double* g_b2 = g_w2 + static_cast<size_t>(h) * c;

  // dW2 = hidden^T . dlogits ; db2 = column sums of dlogits
  ops.matmul_tn(record.hidden.data(), dloss_dlogits.data(), g_w2, h, b, c);
  for (int i = 0; i < b; ++i) {
    auto row = dloss_dlogits.row(i);
    for (int j = 0; j < c; ++j) g_b2[j] += row[j];
  }

  // dhidden = dlogits . W2^T, masked by the ReLU activation pattern
  Matrix dhidden(b, h);
  ops.matmul_nt(dloss_dlogits.data(), model.w2_data(), dhidden.data(), b, c, h);
  for (int i = 0; i < b; ++i) {
    auto act = record.hidden.row(i);
    auto dh = dhidden.row(i);
    for (int j = 0; j < h; ++j) {
      if (act[j] <= 0.0) dh[j] = 0.0;
    }
  }

  ops.matmul_tn(record.input.data(), dhidden.data(), g_w1, d, b, h);
  for (int i = 0; i < b; ++i) {
    auto dh = dhidden.row(i);
    for (int j = 0; j < h; ++j) g_b1[j] += dh[j];
  }
  return grad;
}

AdamState::AdamState(int param_count, double learning_rate, double beta1, double beta2,
                     double epsilon)
    : m(param_count, 0.0),
      v(param_count, 0.0),
      learning_rate(learning_rate),
      beta1(beta1),
      beta2(beta2),
      epsilon(epsilon) {}

void adam_step(MlpModel& model, AdamState& state, std::span<const double> gradient) {
  require(static_cast<int>(gradient.size()) == model.param_count(),
          "adam_step: gradient length mismatch");
  for (size_t i = 0; i < gradient.size(); ++i) {
    if (!std::isfinite(gradient[i])) {
      throw std::runtime_error("adam_step: non-finite gradient entry at coordinate " +
                               std::to_string(i) + "; step refused");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 / (1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const double bc2 = 1.0 / (1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  kernels::active().adam_update(model.flat().data(), state.m.data(), state.v.data(),
                                gradient.data(), model.param_count(), state.learning_rate,
                                state.beta1, state.beta2, bc1, bc2, state.epsilon);
}

double param_distance(const MlpModel& a, const MlpModel& b) {
  require(a.same_shape(b), "param_distance: layer_dims mismatch");
  return std::sqrt(
      kernels::active().squared_distance(a.flat().data(), b.flat().data(), a.param_count()));
}

namespace {

void put_le64(std::ofstream& out, uint64_t bits) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t get_le64(std::ifstream& in, const std::string& path) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error(path + ": truncated checkpoint payload");
  }
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return bits;
}

}  // namespace

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "NOISYLAB-CKPT v1 ";
  const auto& dims = model.layer_dims();
  for (size_t i = 0; i < dims.size(); ++i) out << (i ? "," : "") << dims[i];
  out << ' ' << model.param_count() << '\n';
  for (double v : model.flat()) put_le64(out, std::bit_cast<uint64_t>(v));
  if (!out) throw std::runtime_error(path + ": write failed");
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing checkpoint header");
  std::istringstream hdr(line);
  std::string tag, ver, dims_field;
  int64_t count = -1;
  hdr >> tag >> ver >> dims_field >> count;
  if (tag != "NOISYLAB-CKPT" || ver != "v1" || count < 0) {
    throw std::runtime_error(path + ": malformed checkpoint header '" + line + "'");
  }
  std::vector<int> dims;
  std::istringstream ds(dims_field);
  std::string item;
  while (std::getline(ds, item, ',')) dims.push_back(std::stoi(item));

  MlpModel model(dims, 0);
  if (model.param_count() != count) {
    throw std::runtime_error(path + ": header param count " + std::to_string(count) +
                             " does not match dims (" + std::to_string(model.param_count()) + ")");
  }
  auto flat = model.flat();
  for (int i = 0; i < model.param_count(); ++i) {
    flat[i] = std::bit_cast<double>(get_le64(in, path));
  }
  return model;
}

}  // namespace noisylab
