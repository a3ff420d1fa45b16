/* test harness helpers */
#define MTEST_OK 0
