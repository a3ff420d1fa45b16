#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  int cnt = rank - 68; /* negative count */
  MPI_Send(buf, cnt, MPI_INT, 1, 37, MPI_COMM_WORLD);
  MPI_Finalize();
  return 0;
}
