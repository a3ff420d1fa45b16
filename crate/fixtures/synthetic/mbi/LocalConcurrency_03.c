/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: Synthetic LocalConcurrency pattern

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${EXE}
    | ERROR: LocalConcurrency
    | Synthetic LocalConcurrency pattern
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Request req;
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  buf[0] = (rank + 90) * 54;
  for (int i = 1; i < 25; i++) { }
  MPI_Isend(buf, 22, MPI_INT, 1, 65, MPI_COMM_WORLD, &req);
  __atomic_fetch_add(&buf[0], 80, __ATOMIC_SEQ_CST); /* buffer written before completion */
  MPI_Wait(&req, MPI_STATUS_IGNORE);
  MPI_Finalize();
  return 0;
}
