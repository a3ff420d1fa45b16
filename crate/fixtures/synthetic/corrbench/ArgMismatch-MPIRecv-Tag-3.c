#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  int cnt = (int)(long)rank;
  MPI_Send(buf, cnt, MPI_INT, 1, 34, MPI_COMM_WORLD);
  MPI_Recv(buf, 25, MPI_INT, 0, 35, MPI_COMM_WORLD, MPI_STATUS_IGNORE); /* tag mismatch */
  MPI_Finalize();
  return 0;
}
