#include <cstdio>
int main() { std::puts("eegnet placeholder"); return 0; }
