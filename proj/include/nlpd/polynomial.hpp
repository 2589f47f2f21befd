#pragma once

#include <cstddef>
#include <vector>

namespace nlpd {

/// Real polynomial in monomial form, c[k] multiplying x^k.
struct Polynomial {
  std::vector<double> c;

  std::size_t degree() const { return c.empty() ? 0 : c.size() - 1; }
  double operator()(double x) const {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
    return acc;
  }
  Polynomial derivative() const {
    Polynomial d;
    for (std::size_t k = 1; k < c.size(); ++k) d.c.push_back(double(k) * c[k]);
    if (d.c.empty()) d.c.push_back(0.0);
    return d;
  }
};

}  // namespace nlpd
