#include "voxgan/tape.hpp"

#include <unordered_set>

#include "voxgan/error.hpp"
#include "voxgan/ops.hpp"

namespace voxgan {
namespace {

thread_local Tape* t_active_tape = nullptr;
thread_local bool t_grad_enabled = true;

// Reverse sweep over the nodes recorded before the call. Gradients for ids
// in `keep` are retained in the result; all others are released once their
// producing node has been processed.
// With a non-null `sources`, only tensors that depend on one of the source
// ids receive gradients; everything else is pruned from the sweep.
std::unordered_map<std::uint64_t, Tensor> reverse_sweep(
    const Tensor& output, Tape& tape, bool create_graph,
    const std::unordered_set<std::uint64_t>& keep,
    const std::unordered_set<std::uint64_t>* sources,
    std::unordered_map<std::uint64_t, Tensor>* leaves) {
  if (output.numel() != 1) {
    throw ShapeError("gradient source must be a single-element tensor, got " +
                     to_string(output.shape()));
  }
  std::unordered_map<std::uint64_t, Tensor> grads;
  grads[output.id()] = Tensor::ones(output.shape());

  const std::size_t n = tape.size();
  std::unordered_set<std::uint64_t> reach;
  if (sources) {
    reach = *sources;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& in : tape.nodes()[i].inputs) {
        if (reach.count(in.id())) {
          reach.insert(tape.nodes()[i].output_id);
          break;
        }
      }
    }
  }

  for (std::size_t i = n; i-- > 0;) {
    // The tape may grow while we run backward rules with create_graph, so
    // copy what is needed instead of holding a reference into the vector.
    const std::uint64_t out_id = tape.nodes()[i].output_id;
    auto it = grads.find(out_id);
    if (it == grads.end()) continue;
    Tensor g = it->second;
    if (!keep.count(out_id)) grads.erase(it);

    BackwardFn rule = tape.nodes()[i].backward;
    std::vector<Tensor> inputs = tape.nodes()[i].inputs;
    Needs needed(inputs.size());
    bool any = false;
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      needed[j] = inputs[j].requires_grad() &&
                  (!sources || reach.count(inputs[j].id()) != 0);
      any = any || needed[j];
    }
    if (!any) continue;
    std::vector<Tensor> in_grads;
    if (create_graph) {
      TapeScope scope(tape);
      in_grads = rule(g, needed);
    } else {
      NoGradGuard guard;
      in_grads = rule(g, needed);
    }
    if (in_grads.size() != inputs.size()) {
      throw Error("backward rule of '" + tape.nodes()[i].op +
                  "' returned the wrong number of gradients");
    }
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const Tensor& in = inputs[j];
      const Tensor& gj = in_grads[j];
      if (!needed[j] || !gj.defined()) continue;
      auto found = grads.find(in.id());
      if (found == grads.end()) {
        grads.emplace(in.id(), gj);
      } else if (create_graph) {
        TapeScope scope(tape);
        found->second = add(found->second, gj);
      } else {
        NoGradGuard guard;
        found->second = add(found->second, gj);
      }
      if (leaves && in.is_leaf()) (*leaves)[in.id()] = in;
    }
  }
  return grads;
}

}  // namespace

void Tape::record(TapeNode node) { nodes_.push_back(std::move(node)); }

TapeScope::TapeScope(Tape& tape)
    : previous_(t_active_tape), previous_enabled_(t_grad_enabled) {
  t_active_tape = &tape;
  t_grad_enabled = true;
}

TapeScope::~TapeScope() {
  t_active_tape = previous_;
  t_grad_enabled = previous_enabled_;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tape* active_tape() { return t_active_tape; }
bool recording() { return t_grad_enabled && t_active_tape != nullptr; }

Tensor record_op(const char* op, Tensor out, std::vector<Tensor> inputs,
                 BackwardFn backward) {
  if (!recording()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  TapeNode node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.output_id = out.id();
  node.output_shape = out.shape();
  node.backward = std::move(backward);
  t_active_tape->record(std::move(node));
  return out;
}

Tensor GradientMap::at(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return Tensor::zeros(t.shape());
  return it->second;
}

GradientMap backward(const Tensor& loss, Tape& tape) {
  std::unordered_map<std::uint64_t, Tensor> leaves;
  std::unordered_set<std::uint64_t> keep;
  // Leaves are never node outputs, so their gradients are never released.
  auto grads = reverse_sweep(loss, tape, false, keep, nullptr, &leaves);
  if (loss.is_leaf() && loss.requires_grad()) leaves[loss.id()] = loss;

  GradientMap result;
  // Each leaf receives one already-summed gradient, so map order is irrelevant.
  for (auto& [id, leaf] : leaves) {
    auto it = grads.find(id);
    if (it == grads.end()) continue;
    Tensor g = it->second;
    leaf.accumulate_grad(g);
    result.set(id, g);
  }
  return result;
}

std::vector<Tensor> gradients(const Tensor& output,
                              std::span<const Tensor> inputs, Tape& tape,
                              bool create_graph) {
  std::unordered_set<std::uint64_t> keep;
  for (const auto& in : inputs) keep.insert(in.id());
  auto grads =
      reverse_sweep(output, tape, create_graph, keep, &keep, nullptr);
  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto it = grads.find(in.id());
    result.push_back(it == grads.end() ? Tensor::zeros(in.shape())
                                       : it->second);
  }
  return result;
}

}  // namespace voxgan
