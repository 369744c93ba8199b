#include <iostream>

#include "flatlab/app/app.hpp"

int main(int argc, char** argv) {
  return flatlab::app::main_entry(argc, argv, std::cout, std::cerr);
}
