#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iadn/numerics/error.hpp"
#include "iadn/numerics/layer.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

/// Handle to a value recorded on a particular tape.
struct Var {
  std::uint64_t tape = 0;
  std::size_t index = 0;
};

enum class NodeKind { input, param, op };

/// Ordered record of layer applications. Entries only reference values
/// created earlier, so replaying in reverse is a valid backward order.
///
/// Parameters are held by reference: a parameter tensor must outlive every
/// tape it was registered on and must not change while the tape is live.
template <typename T>
class Tape {
 public:
  struct Node {
    NodeKind kind;
    std::string name;
    std::optional<Tensor<T>> owned;
    const Tensor<T>* external = nullptr;
    std::optional<std::size_t> entry;  // producing entry for op nodes
    bool requires_grad = true;

    const Tensor<T>& value() const { return owned ? *owned : *external; }
  };

  struct Entry {
    LayerSpec spec;
    std::vector<std::size_t> inputs;
    std::vector<std::size_t> params;
    std::size_t output;
  };

  Tape() : id_(next_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  /// Inputs with requires_grad == false still get a (zero) gradient entry but are skipped by backprop.
  Var input(Tensor<T> value, std::string name = {}, bool requires_grad = true) {
    nodes_.push_back({NodeKind::input, std::move(name), std::move(value), nullptr, std::nullopt, requires_grad});
    return {id_, nodes_.size() - 1};
  }

  Var param(std::string name, const Tensor<T>& value) {
    nodes_.push_back({NodeKind::param, std::move(name), std::nullopt, &value, std::nullopt, true});
    return {id_, nodes_.size() - 1};
  }

  Var apply(const LayerSpec& spec, std::span<const Var> inputs, std::span<const Var> params = {}) {
    Entry entry{spec, {}, {}, 0};
    detail::TensorPtrs<T> in, ps;
    for (const Var& v : inputs) {
      entry.inputs.push_back(check(v));
      in.push_back(&nodes_[v.index].value());
    }
    for (const Var& v : params) {
      entry.params.push_back(check(v));
      ps.push_back(&nodes_[v.index].value());
    }
    Tensor<T> out = detail::forward(spec, in, ps);
    if (!out.all_finite()) {
      throw NumericError(std::string(to_string(spec.kind)) + ": produced a non-finite activation");
    }
    entry.output = nodes_.size();
    nodes_.push_back({NodeKind::op, {}, std::move(out), nullptr, entries_.size(), true});
    entries_.push_back(std::move(entry));
    return {id_, nodes_.size() - 1};
  }

  Var apply(const LayerSpec& spec, std::initializer_list<Var> inputs, std::initializer_list<Var> params = {}) {
    return apply(spec, std::span<const Var>(inputs.begin(), inputs.size()),
                 std::span<const Var>(params.begin(), params.size()));
  }

  const Tensor<T>& value(Var v) const { return nodes_[check(v)].value(); }
  bool owns(Var v) const noexcept { return v.tape == id_ && v.index < nodes_.size(); }
  std::size_t check(Var v) const {
    if (!owns(v)) throw UsageError("value was not recorded on this tape");
    return v.index;
  }

  std::uint64_t id() const noexcept { return id_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::vector<Entry> entries_;
};

/// Gradients of a backward pass, one per tape node. Leaf nodes (inputs and
/// parameters) are always populated; unreached ones hold zeros.
template <typename T>
class Gradients {
 public:
  Gradients(const Tape<T>& tape, std::vector<std::optional<Tensor<T>>> grads)
      : tape_id_(tape.id()), grads_(std::move(grads)) {
    for (std::size_t i = 0; i < grads_.size(); ++i) {
      const auto& node = tape.nodes()[i];
      if (node.kind != NodeKind::op) {
        if (!grads_[i]) grads_[i] = Tensor<T>::zeros_like(node.value());
        if (!node.name.empty()) by_name_.emplace(node.name, i);
      }
    }
  }

  const Tensor<T>& of(Var v) const {
    if (v.tape != tape_id_ || v.index >= grads_.size() || !grads_[v.index]) {
      throw UsageError("no gradient recorded for this value");
    }
    return *grads_[v.index];
  }

  /// Gradients of named leaves (parameters and named inputs).
  std::map<std::string, Tensor<T>> named() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, index] : by_name_) out.emplace(name, *grads_[index]);
    return out;
  }

  std::map<std::string, Tensor<T>> take_named() && {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, index] : by_name_) out.emplace(name, std::move(*grads_[index]));
    return out;
  }

 private:
  std::uint64_t tape_id_;
  std::vector<std::optional<Tensor<T>>> grads_;
  std::map<std::string, std::size_t> by_name_;
};

template <typename T>
struct Seed {
  Var output;
  Tensor<T> gradient;
};

/// Reverse pass for sum_k <seed_k, output_k>.
template <typename T>
Gradients<T> backprop(const Tape<T>& tape, std::span<const Seed<T>> seeds) {
  const auto& nodes = tape.nodes();
  std::vector<std::optional<Tensor<T>>> grads(nodes.size());
  for (const auto& seed : seeds) {
    const std::size_t idx = tape.check(seed.output);
    nodes[idx].value().require_same_shape(seed.gradient, "backprop seed");
    if (grads[idx]) {
      *grads[idx] += seed.gradient;
    } else {
      grads[idx] = seed.gradient;
    }
  }

  const auto& entries = tape.entries();
  for (std::size_t e = entries.size(); e-- > 0;) {
    const auto& entry = entries[e];
    if (!grads[entry.output]) continue;
    detail::TensorPtrs<T> in, ps;
    std::vector<Tensor<T>*> gin, gps;
    for (std::size_t i : entry.inputs) {
      in.push_back(&nodes[i].value());
      if (!nodes[i].requires_grad) {
        gin.push_back(nullptr);
        continue;
      }
      if (!grads[i]) grads[i] = Tensor<T>::zeros_like(nodes[i].value());
      gin.push_back(&*grads[i]);
    }
    for (std::size_t i : entry.params) {
      ps.push_back(&nodes[i].value());
      if (!grads[i]) grads[i] = Tensor<T>::zeros_like(nodes[i].value());
      gps.push_back(&*grads[i]);
    }
    detail::backward(entry.spec, in, ps, nodes[entry.output].value(), *grads[entry.output], gin, gps);
  }
  return Gradients<T>(tape, std::move(grads));
}

template <typename T>
Gradients<T> backprop(const Tape<T>& tape, Var output, const Tensor<T>& seed_gradient) {
  const Seed<T> seed{output, seed_gradient};
  return backprop(tape, std::span<const Seed<T>>(&seed, 1));
}

}  // namespace iadn
