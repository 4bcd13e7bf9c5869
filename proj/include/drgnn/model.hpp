#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"

namespace drgnn {

enum class LayerCombine { mean, last };

LayerCombine parse_layer_combine(const std::string& name);
std::string to_string(LayerCombine combine);

/// Immutable propagation matrix plus its transpose for the backward pass.
/// Each snapshot carries a unique id so a backward pass can verify it runs
/// against the same matrix as the forward pass that produced its input.
class AdjacencySnapshot {
 public:
  explicit AdjacencySnapshot(NormalizedAdjacency adjacency);

  const NormalizedAdjacency& forward() const { return forward_; }
  const NormalizedAdjacency& backward() const { return symmetric_ ? forward_ : transposed_; }
  bool symmetric() const { return symmetric_; }
  std::uint64_t id() const { return id_; }

 private:
  NormalizedAdjacency forward_;
  NormalizedAdjacency transposed_;
  bool symmetric_ = false;
  std::uint64_t id_ = 0;
};

/// out = A * in. `out` is resized as needed.
void multiply(const NormalizedAdjacency& adjacency, const Matrix& in, Matrix& out);

struct PropagationOutput {
  std::vector<Matrix> layers;  // E^(0) .. E^(K)
  Matrix final;
  std::uint64_t snapshot_id = 0;
};

/// E^(k) = A E^(k-1) for k = 1..K, combined by layer mean or last layer.
PropagationOutput propagate(const AdjacencySnapshot& snapshot, const Matrix& embeddings,
                            std::size_t layers, LayerCombine combine = LayerCombine::mean);

/// Gradient on E^(0) given the gradient on the combined output. Throws
/// NumericError if `snapshot` is not the one used by `forward`.
Matrix backpropagate(const AdjacencySnapshot& snapshot, const PropagationOutput& forward,
                     const Matrix& upstream, std::size_t layers,
                     LayerCombine combine = LayerCombine::mean);

/// Dot product of the final user and item rows. Throws DataError on bad ids.
double score(const Matrix& final_embeddings, NodeId user, NodeId item);

/// Zero-mean normal initialization.
Matrix init_embeddings(std::size_t nodes, std::size_t dim, double stddev, std::uint64_t seed);

// Embedding dump: header "num_nodes dim", then one space-separated row per node.
void write_embeddings(std::ostream& out, const Matrix& embeddings);
Matrix read_embeddings(std::istream& in);
void save_embeddings(const std::string& path, const Matrix& embeddings);
Matrix load_embeddings(const std::string& path);

}  // namespace drgnn
