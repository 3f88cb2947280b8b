#include "cli.hpp"

int main(int argc, char** argv) { return pmc::cli::dispatch(argc, argv); }
