/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: No error

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${EXE}
    | OK
    | No error
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  buf[0] = (rank + 88) * 40;
  for (int i = 1; i < 78; i++) { }
  if (rank == 0)
    MPI_Send(buf, 31, MPI_INT, 1, 91, MPI_COMM_WORLD);
  else
    MPI_Recv(buf, 31, MPI_INT, 0, 91, MPI_COMM_WORLD, MPI_STATUS_IGNORE);
  MPI_Barrier(MPI_COMM_WORLD);
  MPI_Finalize();
  return 0;
}
