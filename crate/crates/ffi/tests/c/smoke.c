#include <math.h>
#include <stdio.h>
#include "chargekit.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    double pos[] = {1, 1, 0, -1, 1, 0, -1, -1, 0, 1, -1, 0};
    double q[] = {1, -1, 1, -1};
    CkConfig *cfg = NULL;
    CHECK(ck_config_new(3, 4, pos, q, &cfg) == CK_STATUS_OK);
    CHECK(ck_config_len(cfg) == 4);

    CkOnsager o;
    CHECK(ck_onsager(cfg, &o) == CK_STATUS_OK);
    CHECK(fabs(o.margin - sqrt(0.5)) < 1e-12);

    double origin[] = {0, 0, 0}, g[3];
    CHECK(ck_gradient(cfg, false, origin, g) == CK_STATUS_OK);
    CHECK(fabs(g[0]) < 1e-14 && fabs(g[1]) < 1e-14 && fabs(g[2]) < 1e-14);
    ck_config_free(cfg);

    double dup[] = {0, 0, 0, 0, 0, 0};
    CHECK(ck_config_new(3, 2, dup, q, &cfg) == CK_STATUS_DUPLICATE_POSITION);
    CHECK(cfg == NULL);
    char msg[256];
    CHECK(ck_last_error_message(msg, sizeof msg) > 0);

    printf("ok %s\n", ck_version());
    return 0;
}
