// Acceptance suite: one checkable criterion per case, each printing a
// single PASS/FAIL line. Placeholder during bring-up.
int main() { return 0; }
