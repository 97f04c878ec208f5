#include "gbs/grad_ledger.hpp"

#include "gbs/errors.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace gbs {

void ProposalBatch::validate() const {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InputError("ProposalBatch: logits rows and labels disagree");
  }
  if (!source.empty() && source.size() != labels.size()) {
    throw InputError("ProposalBatch: source flags and labels disagree");
  }
  const auto n1 = static_cast<ClassIndex>(logits.cols());
  for (ClassIndex c : labels) {
    if (c < 0 || c >= n1) throw InputError("ProposalBatch: label " + std::to_string(c) + " out of range");
  }
  if (!logits.allFinite()) throw InputError("ProposalBatch: non-finite logits");
}

BatchGrads batch_loss_and_grad(const ProposalBatch& batch, const LossSpec& spec) {
  batch.validate();
  BatchGrads out;
  const auto rows = static_cast<Eigen::Index>(batch.size());
  out.losses.resize(rows);
  out.grads.resize(rows, batch.logits.cols());
  for (Eigen::Index j = 0; j < rows; ++j) {
    auto lg = loss_and_grad(batch.logits.row(j).transpose(), batch.labels[static_cast<std::size_t>(j)], spec);
    out.losses[j] = lg.loss;
    out.grads.row(j) = lg.grad.transpose();
  }
  return out;
}

GradientLedger::GradientLedger(std::size_t num_classes, double eta_g)
    : eta_g_(eta_g),
      raw_(Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(num_classes))),
      ema_(raw_) {
  if (num_classes < 2) throw InputError("GradientLedger: need at least one foreground class and background");
  if (!(eta_g >= 0.0 && eta_g <= 1.0)) throw InputError("GradientLedger: eta_g must lie in [0, 1]");
}

void GradientLedger::add(ClassIndex label, const Vector& grad) {
  if (grad.size() != raw_.rows()) throw InputError("GradientLedger: gradient length mismatch");
  if (label < 0 || label >= raw_.cols()) throw InputError("GradientLedger: label out of range");
  raw_.col(label) += grad;
}

void GradientLedger::accumulate(std::span<const ClassIndex> labels, const Matrix& grads) {
  if (static_cast<std::size_t>(grads.rows()) != labels.size() || grads.cols() != raw_.rows()) {
    throw InputError("GradientLedger: gradient matrix does not match the batch");
  }
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const ClassIndex c = labels[j];
    if (c < 0 || c >= raw_.cols()) throw InputError("GradientLedger: label out of range");
    raw_.col(c) += grads.row(static_cast<Eigen::Index>(j)).transpose();
  }
}

void GradientLedger::ema_update() {
  if (!raw_.allFinite()) throw NumericError("GradientLedger: non-finite batch gradient matrix");
  ema_ = eta_g_ * ema_ + (1.0 - eta_g_) * raw_;
  if (!ema_.allFinite()) throw NumericError("GradientLedger: non-finite moving average");
  raw_.setZero();
}

void GradientLedger::set_ema(Matrix ema) {
  if (ema.rows() != raw_.rows() || ema.cols() != raw_.cols()) throw InputError("GradientLedger: shape mismatch");
  ema_ = std::move(ema);
}

void GradientLedger::reset() {
  raw_.setZero();
  ema_.setZero();
}

void write_matrix(std::ostream& out, const Matrix& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError("matrix line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("matrix line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix: no rows");
  if (rows.size() != rows.front().size()) throw ParseError("matrix: not square");
  Matrix m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace gbs
