#include "lookaround/cli.hpp"

int main(int argc, char** argv) { return lookaround::cli::dispatch(argc, argv); }
