/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: Bcast vs Reduce

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${EXE}
    | ERROR: CallMatching
    | Bcast vs Reduce
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
#include <mpi.h>
int main(int argc, char **argv) { MPI_Init(&argc, &argv); MPI_Finalize(); return 0; }
