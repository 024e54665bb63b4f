// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include "minder/pipeline.hpp"
int main() { std::puts("acceptance placeholder"); return 1; }
