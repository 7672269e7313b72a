#include "lipschitz_lr/cli.hpp"

int main(int argc, char** argv) { return lipschitz_lr::cli_main(argc, argv); }
