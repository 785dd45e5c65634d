#include "ear/bench/cli.hpp"

int main(int argc, char** argv) { return ear::bench::run_cli(argc, argv); }
