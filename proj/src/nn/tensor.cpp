#include "sid/nn/tensor.hpp"

#include <unordered_set>

namespace sid::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
std::size_t backward(const BasicTensor<T>& loss) {
  require(loss.defined() && loss.numel() == 1, "backward() needs a scalar tensor");
  if (!loss.requires_grad()) return 0;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(&loss.node(), 0);
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node().grad_buffer()[0] += T(1);
  std::size_t visited = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& node = **it;
    if (!node.backward || node.grad.empty()) continue;
    node.backward(node);
    ++visited;
  }
  return visited;
}

template std::size_t backward(const BasicTensor<float>&);
template std::size_t backward(const BasicTensor<double>&);

}  // namespace sid::nn
