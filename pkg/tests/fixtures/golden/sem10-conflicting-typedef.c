typedef int T;
typedef double T;
