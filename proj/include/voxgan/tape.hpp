#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "voxgan/tensor.hpp"

namespace voxgan {

// needed[i] is false when input i requires no gradient; rules may then
// return an undefined Tensor for it.
using Needs = std::vector<bool>;

// Maps the gradient of a node output to one gradient per node input. An
// undefined Tensor means "no contribution". Rules are written in terms of
// the differentiable ops, so running them with recording enabled yields
// higher-order gradients.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const Needs&)>;

struct TapeNode {
  std::string op;
  std::vector<Tensor> inputs;
  std::uint64_t output_id = 0;
  Shape output_shape;
  BackwardFn backward;
};

// Ordered record of differentiable operations. Nodes are appended in
// execution order, so every node's inputs precede it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(TapeNode node);
  const std::vector<TapeNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<TapeNode> nodes_;
};

// Makes `tape` the recording target of the calling thread for the lifetime
// of the scope. Scopes nest; the previous target is restored on exit.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
  bool previous_enabled_;
};

// Suspends recording on the calling thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Tape* active_tape();
bool recording();

// Records `out` as produced from `inputs` when recording is on and any input
// requires grad. Returns `out` (flagged as a non-leaf when recorded).
Tensor record_op(const char* op, Tensor out, std::vector<Tensor> inputs,
                 BackwardFn backward);

// Gradients keyed by tensor id.
class GradientMap {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  // Zero tensor of t's shape when t received no gradient.
  Tensor at(const Tensor& t) const;
  void set(std::uint64_t id, Tensor g) { grads_[id] = std::move(g); }
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<std::uint64_t, Tensor> grads_;
};

// Reverse pass from a single-element `loss`. Every requires-grad leaf reached
// gets d(loss)/d(leaf) added to its grad(); the returned map also holds those
// leaf gradients. A loss not connected to any leaf yields no gradients.
GradientMap backward(const Tensor& loss, Tape& tape);

// d(output)/d(inputs[i]) without touching grad(). With create_graph the
// gradient computation itself is recorded on `tape`, so the results can be
// differentiated again.
std::vector<Tensor> gradients(const Tensor& output,
                              std::span<const Tensor> inputs, Tape& tape,
                              bool create_graph = false);

}  // namespace voxgan
