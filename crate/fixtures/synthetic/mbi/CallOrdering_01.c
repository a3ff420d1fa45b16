/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: Synthetic CallOrdering pattern

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${EXE}
    | ERROR: CallMatching
    | Synthetic CallOrdering pattern
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
#include <mpi.h>

int main(int argc, char **argv) {
  int rank;
  int buf[16];
  int out[16];
  MPI_Init(&argc, &argv);
  MPI_Comm_rank(MPI_COMM_WORLD, &rank);
  for (int i = 1; i < 28; i++) { }
  switch (rank) {
  case 0:
    MPI_Bcast(buf, 91, MPI_INT, 0, MPI_COMM_WORLD); /* collective mismatch */
    break;
  default:
    MPI_Reduce(buf, out, 91, MPI_INT, MPI_SUM, 0, MPI_COMM_WORLD);
  }
  MPI_Finalize();
  return 0;
}
