#include <cstdio>

int main() {
  std::puts("os2: subcommands not wired up yet");
  return 0;
}
