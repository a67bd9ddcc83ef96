#include "ppap/cli.hpp"

int main(int argc, char** argv) { return ppap::cli::dispatch(argc, argv); }
