#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "dirmh.h"

int main(void) {
    DirmhTarget *target = NULL;
    if (dirmh_target_banana(0.03, 2, &target) != DIRMH_STATUS_OK) return 1;
    DirmhKernel kernel = {DIRMH_FLAVOR_DMH, 0.1, 0.5, 1.0, 0.0};
    double x0[2] = {0.0, 3.0};
    DirmhChain *chain = NULL;
    if (dirmh_run_chain(target, kernel, 42, x0, 2, 2000, 0, 1, &chain) != DIRMH_STATUS_OK) return 2;
    size_t n = dirmh_chain_len(chain);
    double *states = malloc(n * 2 * sizeof(double));
    if (dirmh_chain_states(chain, states, n * 2) != DIRMH_STATUS_OK) return 3;
    DirmhSummary summary;
    double ess[2], iact[2];
    if (dirmh_chain_diagnostics(chain, 0, &summary, ess, iact, 2) != DIRMH_STATUS_OK) return 4;
    if (dirmh_target_banana(-1.0, 2, &target) != DIRMH_STATUS_INVALID_ARGUMENT) return 5;
    if (dirmh_last_error() == NULL) return 6;
    printf("%zu %.17g %.17g %.17g\n", n, summary.acceptance_rate, states[2 * n - 2], states[2 * n - 1]);
    free(states);
    dirmh_chain_free(chain);
    dirmh_target_free(target);
    return 0;
}
