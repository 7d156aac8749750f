// Compiles the amalgamated Catch2 translation unit (with its default main)
// once for the whole suite.
#include <catch2/catch_amalgamated.cpp>
