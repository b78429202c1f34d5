#include <cstdio>

#include "quadcut/arith.hpp"

int main() {
  std::puts("quadcut: placeholder");
  return 0;
}
