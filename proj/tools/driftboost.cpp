#include "driftboost/cli.hpp"

int main(int argc, char** argv) { return driftboost::run_cli(argc, argv); }
