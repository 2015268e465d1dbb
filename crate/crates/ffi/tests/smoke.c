#include <stdio.h>
#include "elastic_complex.h"

int main(void) {
    EcMesh *m = NULL;
    if (ec_mesh_new("unit_triangle", &m) != EC_STATUS_OK) return 1;
    EcInfSup r;
    if (ec_infsup(m, 3, EC_BC_TRACTION, false, &r) != EC_STATUS_OK) return 2;
    if (r.dim_sigma != 9 || !(r.beta > 0.1 && r.beta <= 1.0 + 1e-10)) return 3;
    if (ec_infsup(m, 1, EC_BC_TRACTION, false, &r) != EC_STATUS_INVALID_ARGUMENT) return 4;
    char msg[256];
    size_t n = ec_last_error(msg, sizeof msg);
    if (n == 0 || n >= sizeof msg) return 5;
    ec_mesh_free(m);
    printf("beta %.6f\n", r.beta);
    return 0;
}
