/* priv_placement: generated by polyred
 * mode: privatized
 * schedule:
 *   S(i, j, k) -> (i, 0, j, 0, k, 0)
 * loop classification:
 *   S: i reduction-parallel, j parallel, k reduction-parallel
 * parallel dimension: 4
 * privatized: P (S +, identity 0), placement depth=2, NY location(s) per context, aggregated 1 time(s)
 */
#include <omp.h>

#ifndef NUM_CONTEXTS
#define NUM_CONTEXTS 4
#endif

void priv_placement(int NX, int NY, int NZ, int P[NY], int Q[NX][NY], int R[NY][NZ])
{
  int P_priv[NUM_CONTEXTS][NY];
  for (int ctx = 0; ctx < NUM_CONTEXTS; ctx++)
    for (int a0 = 0; a0 < NY; a0++)
      P_priv[ctx][a0] = 0;
  for (int i = 0; i < NX; i++)
    for (int j = 0; j < NY; j++) {
      #pragma omp parallel for schedule(static) num_threads(NUM_CONTEXTS)
      for (int k = 0; k < NZ; k++) {
        int ctx = omp_get_thread_num();
        P_priv[ctx][j] = P_priv[ctx][j] + Q[i][j] * R[j][k];
      }
    }
  for (int ctx = 0; ctx < NUM_CONTEXTS; ctx++)
    for (int a0 = 0; a0 < NY; a0++)
      P[a0] = P[a0] + P_priv[ctx][a0];
}
