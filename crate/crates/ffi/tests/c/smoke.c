#include <math.h>
#include <stdio.h>
#include "sparse_bandit.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    SbGeometry *ball = NULL;
    CHECK(sb_geometry_euclidean_ball(4, 1.0, &ball) == SB_STATUS_OK);
    CHECK(sb_geometry_dim(ball) == 4);

    double theta[4] = {0.1, -0.9, 0.5, 0.2};
    size_t support[2];
    size_t len = 0;
    double action[4];
    double value = 0.0;
    CHECK(sb_exact_top_h(ball, theta, 2, support, &len, action, &value) == SB_STATUS_OK);
    CHECK(len == 2 && support[0] == 1 && support[1] == 2);
    CHECK(fabs(value - sqrt(1.06)) < 1e-12);

    int member = 0;
    CHECK(sb_membership(ball, action, &member) == SB_STATUS_OK && member == 1);

    SbGeometry *bad = NULL;
    CHECK(sb_geometry_lp_ball(3, 3.0, 1.0, &bad) == SB_STATUS_INVALID_GEOMETRY);
    CHECK(bad == NULL && sb_last_error() != NULL);

    sb_geometry_free(ball);
    printf("ok\n");
    return 0;
}
