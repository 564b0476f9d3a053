#include "advaware/neuralnet.hpp"

#include <algorithm>

namespace advaware {

double accuracy(const NeuralNet<double>& net, const Dataset& d) {
  if (d.empty()) return 0;
  std::vector<char> hit(d.size());
  parallel_for(d.size(), [&](std::size_t i) { hit[i] = net.predict(d.images[i].pixels) == d.images[i].label; });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(d.size());
}

}  // namespace advaware
