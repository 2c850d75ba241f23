// Builds a two-layer network by hand on the reverse-mode graph, trains it on
// a toy regression problem with the bundled optimiser, and prints the loss
// curve. Shows the Graph/Node/Workspace/ParameterStore machinery without any
// of the linguistic layers on top.

#include <cstdio>

#include "morphparse/adam.hpp"
#include "morphparse/nn.hpp"

using namespace morphparse;

int main() {
  Rng rng(7);

  // y = sin-ish function of two inputs, 64 sampled points
  Tensor<float> x(64, 2), y(64, 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const float a = rng.uniform() * 2.0f - 1.0f;
    const float b = rng.uniform() * 2.0f - 1.0f;
    x(i, 0) = a;
    x(i, 1) = b;
    y(i, 0) = a * b + 0.5f * a - 0.25f * b;
  }

  nn::ParameterStore<float> store;
  auto l1 = nn::Dense<float>::create(store, "l1", 2, 16, rng);
  auto l2 = nn::Dense<float>::create(store, "l2", 16, 1, rng);
  nn::Adam<float> adam(store, 0.01, 0.9, 0.999, 1e-8);

  for (int step = 1; step <= 300; ++step) {
    Graph<float> g;
    nn::Workspace<float> ws(g, rng, true);

    Node<float>* h = ops::tanh(g, l1.apply(ws, ws.constant(x)));
    Node<float>* out = l2.apply(ws, h);

    // mean squared error, written with the same ops the models use
    Node<float>* diff = ops::add(g, out, ops::scale(g, ws.constant(y), -1.0f));
    Node<float>* loss = ops::scale(g, ops::sum_all(g, ops::mul(g, diff, diff)),
                                   1.0f / static_cast<float>(x.rows()));

    g.backward(*loss);
    adam.apply(ws.bound);

    if (step % 50 == 0 || step == 1)
      std::printf("step %3d  mse %.6f\n", step, static_cast<double>(loss->value(0, 0)));
  }

  std::printf("parameters trained: %zu tensors, %zu values\n", store.size(),
              store.total_values());
  return 0;
}
