#include "flowseries/cli.hpp"

int main(int argc, char** argv) { return flowseries::dispatch(argc, argv); }
