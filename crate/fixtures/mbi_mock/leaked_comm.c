/* ///////////////////////// The MPI Bugs Initiative ////////////////////////

  Origin: synthetic fixture

  Description: Comm never freed

  BEGIN_MBI_TESTS
    $ mpirun -np 2 ${EXE}
    | ERROR: ResLeak
    | Comm never freed
  END_MBI_TESTS
//////////////////////       End of MBI headers        /////////////////// */
#include <mpi.h>
int main(int argc, char **argv) { MPI_Init(&argc, &argv); MPI_Finalize(); return 0; }
