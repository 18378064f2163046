#include "servobench/cli.hpp"

int main(int argc, char** argv) { return servobench::cli::run(argc, argv); }
