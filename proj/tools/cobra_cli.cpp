#include <cstdio>
int main() { std::puts("cobra_cli placeholder"); return 0; }
