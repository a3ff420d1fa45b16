#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  buf[0] = (rank + 81) * 14;
  int cnt = rank % 82;
  MPI_Send(buf, cnt, MPI_INT, 1, 23, MPI_COMM_WORLD);
  MPI_Abort(MPI_COMM_WORLD, 1); /* request never completed */
  MPI_Finalize();
  return 0;
}
