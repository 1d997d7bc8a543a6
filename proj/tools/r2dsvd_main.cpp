#include "r2dsvd/experiment.hpp"

int main(int argc, char** argv) { return r2dsvd::run_cli(argc, argv); }
