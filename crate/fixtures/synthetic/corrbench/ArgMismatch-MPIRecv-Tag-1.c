#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  int cnt = (int)(long)rank;
  MPI_Send(buf, cnt, MPI_INT, 1, 91, MPI_COMM_WORLD);
  MPI_Recv(buf, 94, MPI_INT, 0, 92, MPI_COMM_WORLD, MPI_STATUS_IGNORE); /* tag mismatch */
  MPI_Finalize();
  return 0;
}
