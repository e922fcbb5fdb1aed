#include "cnmt/cli.hpp"

int main(int argc, char** argv) { return cnmt::cli::dispatch(argc, argv); }
