#include "qsm/cli.hpp"

int main(int argc, char **argv) { return qsm::cli::dispatch(argc, argv); }
