#include <mpi.h>
#include "mpitest.h"

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  int cnt = rank > 4 ? 4 : rank;
  MPI_Send(buf, cnt, MPI_INT, 1, 81, MPI_COMM_WORLD);
  MPI_Allreduce(MPI_IN_PLACE, buf, 1, MPI_INT, MPI_SUM, MPI_COMM_WORLD);
  MPI_Finalize();
  return 0;
}
