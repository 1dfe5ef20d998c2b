int f(void);
double f(void) {
    return 1.0;
}
