#include <stdio.h>
#include "nlmeas.h"

int main(void) {
    NlmParams p = {.alpha = 0.39269908169872414, .beta = 0.39269908169872414, .n_ebits = 3, .u_b = NULL};
    NlmRun *run = NULL;
    if (nlm_run_create_eigen("general-product", &p, 3, &run) != NLM_STATUS_OK) {
        fprintf(stderr, "%s\n", nlm_last_error());
        return 1;
    }
    double success = 0.0;
    size_t count = 0;
    nlm_run_success_probability(run, &success);
    nlm_run_branch_count(run, &count);
    printf("nlmeas %s: %zu branches, success %.12f\n", nlm_version(), count, success);
    nlm_run_free(run);
    return 0;
}
