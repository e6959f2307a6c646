#include <math.h>
#include <stdio.h>
#include "dib_ffi.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        DibStatus st_ = (call);                                             \
        if (st_ != DIB_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, dib_last_error()); \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    size_t dims[3] = {2, 2, 2};
    double probs[8] = {0.5, 0, 0, 0, 0, 0, 0, 0.5};
    DibJoint *joint = NULL;
    CHECK(dib_joint_new(dims, 3, probs, 8, &joint));
    DibBaSolution *sol = NULL;
    CHECK(dib_ba_solve(joint, 0.5, 0, 2, NULL, 0, &sol));
    DibPoint p;
    CHECK(dib_ba_solution_point(sol, &p));
    if (fabs(p.relevance - log(2.0)) > 1e-6) return 2;
    size_t rows = 0, cols = 0;
    CHECK(dib_ba_solution_encoder(sol, 0, NULL, 0, &rows, &cols));
    if (rows != 2 || cols != 2) return 3;
    dib_ba_solution_free(sol);
    dib_joint_free(joint);

    double gains[1] = {1.0};
    DibGaussModel *model = NULL;
    CHECK(dib_gauss_model_scalar(gains, 1, &model));
    double c = 0;
    CHECK(dib_cib_bound(model, 1.0, DIB_FIELD_REAL, &c));
    if (fabs(c - (-0.5 * log(1.0 - 0.5 * (1.0 - exp(-2.0))))) > 1e-6) return 4;
    if (dib_cib_bound(model, 1.0, 9, &c) != DIB_STATUS_INVALID_ARGUMENT) return 5;
    dib_gauss_model_free(model);
    printf("ok %s\n", dib_version());
    return 0;
}
