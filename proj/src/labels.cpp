#include "noisylab/labels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace noisylab {

LabelStore::LabelStore(std::vector<int> noisy_labels, int num_classes, double k_init,
                       double lambda_step)
    : noisy_labels_(std::move(noisy_labels)), k_init_(k_init), lambda_step_(lambda_step) {
  require(num_classes >= 2, "LabelStore: need at least 2 classes");
  require(k_init >= 0.0, "LabelStore: k_init must be non-negative");
  require(lambda_step >= 0.0, "LabelStore: lambda_step must be non-negative");
  const int n = static_cast<int>(noisy_labels_.size());
  require(n > 0, "LabelStore: empty label set");
  y_tilde_ = Matrix(n, num_classes, 0.0);
  for (int i = 0; i < n; ++i) {
    const int y = noisy_labels_[i];
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("LabelStore: label " + std::to_string(y) + " at index " +
                                  std::to_string(i) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
    y_tilde_(i, y) = k_init;
  }
}

void LabelStore::set_lambda_step(double lambda) {
  require(lambda >= 0.0, "LabelStore: lambda_step must be non-negative");
  lambda_step_ = lambda;
}

Matrix LabelStore::distribution(std::span<const int> indices) const {
  const int c = num_classes();
  Matrix out(static_cast<int>(indices.size()), c);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= size()) {
      throw std::out_of_range("LabelStore::distribution: index " + std::to_string(idx) +
                              " outside [0, " + std::to_string(size()) + ")");
    }
    auto z = y_tilde_.row(idx);
    auto p = out.row(static_cast<int>(i));
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      p[j] = std::exp(z[j] - zmax);
      denom += p[j];
    }
    for (int j = 0; j < c; ++j) p[j] /= denom;
  }
  return out;
}

int LabelStore::update(std::span<const int> indices, const Matrix& grad1, const Matrix& grad2) {
  const int b = static_cast<int>(indices.size());
  require(grad1.rows() == b && grad2.rows() == b, "LabelStore::update: gradient row count");
  require(grad1.cols() == num_classes() && grad2.cols() == num_classes(),
          "LabelStore::update: gradient width");
  int refused = 0;
  for (int i = 0; i < b; ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= size()) {
      throw std::out_of_range("LabelStore::update: index " + std::to_string(idx) + " outside [0, " +
                              std::to_string(size()) + ")");
    }
    auto g1 = grad1.row(i);
    auto g2 = grad2.row(i);
    bool finite = true;
    for (int j = 0; j < num_classes(); ++j) {
      if (!std::isfinite(g1[j] + g2[j])) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      ++refused;
      continue;
    }
    auto row = y_tilde_.row(idx);
    for (int j = 0; j < num_classes(); ++j) {
      row[j] -= lambda_step_ * (g1[j] + g2[j]);
    }
  }
  return refused;
}

std::vector<int> LabelStore::corrected_labels() const {
  std::vector<int> out(size());
  for (int i = 0; i < size(); ++i) {
    auto row = y_tilde_.row(i);
    int best = 0;
    for (int j = 1; j < num_classes(); ++j) {
      if (row[j] > row[best]) best = j;  // softmax is monotone in the logit
    }
    out[i] = best;
  }
  return out;
}

CorrectionTable export_corrected(const LabelStore& store, const CorruptionRecord& record) {
  require(record.size() == store.size(), "export_corrected: record length " +
                                             std::to_string(record.size()) + " != store size " +
                                             std::to_string(store.size()));
  CorrectionTable table;
  table.rows.reserve(store.size());

  std::vector<int> all(store.size());
  for (int i = 0; i < store.size(); ++i) all[i] = i;
  const Matrix dist = store.distribution(all);

  int corrupted = 0, recovered = 0, intact = 0, preserved = 0;
  for (int i = 0; i < store.size(); ++i) {
    auto p = dist.row(i);
    int best = 0;
    for (int j = 1; j < store.num_classes(); ++j) {
      if (p[j] > p[best]) best = j;
    }
    table.rows.push_back({i, record.clean_labels[i], record.noisy_labels[i], best, p[best]});
    if (record.corrupted_mask[i]) {
      ++corrupted;
      if (best == record.clean_labels[i]) ++recovered;
    } else {
      ++intact;
      if (best == record.clean_labels[i]) ++preserved;
    }
  }
  table.recovery_rate = corrupted > 0 ? static_cast<double>(recovered) / corrupted : 0.0;
  table.preservation_rate = intact > 0 ? static_cast<double>(preserved) / intact : 1.0;
  return table;
}

void write_corrections_csv(const CorrectionTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "index,clean,noisy,corrected,max_prob\n";
  char buf[64];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.max_prob);
    out << r.index << ',' << r.clean << ',' << r.noisy << ',' << r.corrected << ',' << buf << '\n';
  }
}

}  // namespace noisylab
