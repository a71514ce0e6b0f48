#pragma once

// Model-wide finite-difference audit: every scalar parameter's analytic
// gradient of the cross-entropy loss against a central difference.

#include <cstdint>
#include <string>
#include <vector>

#include "domaingcn/model.hpp"

namespace domaingcn {

// Seeded graph with `nodes` patches on a compact grid, standard-normal
// embeddings, tissue probabilities spanning all ulcer weights and `edges`
// distinct directed edges without self-loops.
WsiGraph MakeAuditGraph(std::uint64_t seed, int nodes = 10, int edges = 8, int pe_dim = 32);

// Smallest |z| over the ReLU inputs that reach the loss: the message
// activations of nodes that are some node's neighbor and every MLP hidden
// pre-activation. Positional columns of the first layer's input are skipped
// since no parameter moves them.
double ReluKinkMargin(const WsiGraph& graph, const ModelParams& params, const HyperParams& hyper);

struct AuditPoint {
  WsiGraph graph;
  ModelParams params;
  int draw = 0;
  double margin = 0.0;
};

// Draws graph and parameters from MixSeed(seed, draw) for draw = 0, 1, ...
// and returns the first pair whose ReLU kink margin is at least
// `min_margin`, so that central differences never straddle a kink. Throws a
// contract violation after `max_draws` rejections.
AuditPoint DrawAuditPoint(std::uint64_t seed, const HyperParams& hyper, int nodes = 10,
                          int edges = 8, double min_margin = 1e-3, int max_draws = 100000);

struct ParameterAudit {
  std::string name;
  std::size_t count = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double max_absolute_error = 0.0;
};

struct ModelAudit {
  std::vector<ParameterAudit> parameters;  // ForEach order
  double loss = 0.0;
  double max_relative_error = 0.0;  // NaN if any comparison was NaN
  double max_absolute_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Perturbed losses are evaluated from cached activations: a layer parameter
// restarts the forward pass at that layer's input, and a projection weight
// shifts the projected features by h times the matching input column, which
// is the same function value as re-running the projection.
ModelAudit AuditModelGradients(const WsiGraph& graph, const ModelParams& params,
                               const HyperParams& hyper, double h = 1e-5);

}  // namespace domaingcn
