#include "transcap/harness.hpp"

int main(int argc, char** argv) { return transcap::harness::cli_main(argc, argv); }
