#include "drgnn/model.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "drgnn/error.hpp"

namespace drgnn {

namespace {
std::atomic<std::uint64_t> next_snapshot_id{1};
}

LayerCombine parse_layer_combine(const std::string& name) {
  if (name == "mean") return LayerCombine::mean;
  if (name == "last") return LayerCombine::last;
  throw UsageError("unknown layer combination '" + name + "' (expected mean or last)");
}

std::string to_string(LayerCombine combine) {
  return combine == LayerCombine::mean ? "mean" : "last";
}

AdjacencySnapshot::AdjacencySnapshot(NormalizedAdjacency adjacency)
    : forward_(std::move(adjacency)), id_(next_snapshot_id++) {
  symmetric_ = forward_.is_symmetric();
  if (!symmetric_) transposed_ = forward_.transpose();
}

void multiply(const NormalizedAdjacency& adjacency, const Matrix& in, Matrix& out) {
  if (in.rows() != adjacency.num_nodes) throw NumericError("multiply: shape mismatch");
  if (!out.same_shape(in)) out = Matrix(in.rows(), in.cols());
  const std::size_t dim = in.cols();
  for (NodeId r = 0; r < adjacency.num_nodes; ++r) {
    auto dst = out.row(r);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t e = adjacency.row_offsets[r]; e < adjacency.row_offsets[r + 1]; ++e) {
      const double w = adjacency.values[e];
      auto src = in.row(adjacency.columns[e]);
      for (std::size_t c = 0; c < dim; ++c) dst[c] += w * src[c];
    }
  }
}

PropagationOutput propagate(const AdjacencySnapshot& snapshot, const Matrix& embeddings,
                            std::size_t layers, LayerCombine combine) {
  PropagationOutput out;
  out.snapshot_id = snapshot.id();
  out.layers.reserve(layers + 1);
  out.layers.push_back(embeddings);
  for (std::size_t k = 1; k <= layers; ++k) {
    Matrix next;
    multiply(snapshot.forward(), out.layers.back(), next);
    out.layers.push_back(std::move(next));
  }
  if (combine == LayerCombine::last) {
    out.final = out.layers.back();
  } else {
    out.final = out.layers.front();
    for (std::size_t k = 1; k <= layers; ++k) out.final += out.layers[k];
    out.final *= 1.0 / static_cast<double>(layers + 1);
  }
  return out;
}

Matrix backpropagate(const AdjacencySnapshot& snapshot, const PropagationOutput& forward,
                     const Matrix& upstream, std::size_t layers, LayerCombine combine) {
  if (forward.snapshot_id != snapshot.id()) {
    throw NumericError("backpropagate: adjacency snapshot differs from the forward pass");
  }
  const NormalizedAdjacency& back = snapshot.backward();
  if (combine == LayerCombine::last) {
    Matrix grad = upstream;
    Matrix tmp;
    for (std::size_t k = 0; k < layers; ++k) {
      multiply(back, grad, tmp);
      std::swap(grad, tmp);
    }
    return grad;
  }
  // Horner form: G_0 = c (G + A^T (G + A^T (G + ...))), c = 1/(K+1)
  Matrix acc = upstream;
  Matrix tmp;
  for (std::size_t k = 0; k < layers; ++k) {
    multiply(back, acc, tmp);
    tmp += upstream;
    std::swap(acc, tmp);
  }
  acc *= 1.0 / static_cast<double>(layers + 1);
  return acc;
}

double score(const Matrix& final_embeddings, NodeId user, NodeId item) {
  if (user >= final_embeddings.rows() || item >= final_embeddings.rows()) {
    std::ostringstream msg;
    msg << "score: node id out of range (" << user << ", " << item << ")";
    throw DataError(msg.str());
  }
  return dot(final_embeddings.row(user), final_embeddings.row(item));
}

Matrix init_embeddings(std::size_t nodes, std::size_t dim, double stddev, std::uint64_t seed) {
  Matrix e(nodes, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& x : e.values()) x = normal(rng);
  return e;
}

void write_embeddings(std::ostream& out, const Matrix& embeddings) {
  out << embeddings.rows() << ' ' << embeddings.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    auto row = embeddings.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      out << row[c];
    }
    out << '\n';
  }
}

Matrix read_embeddings(std::istream& in) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> rows >> cols)) throw DataError("embedding dump: missing header");
  Matrix e(rows, cols);
  for (double& x : e.values()) {
    if (!(in >> x)) throw DataError("embedding dump: truncated body");
  }
  return e;
}

void save_embeddings(const std::string& path, const Matrix& embeddings) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_embeddings(out, embeddings);
}

Matrix load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return read_embeddings(in);
}

}  // namespace drgnn
