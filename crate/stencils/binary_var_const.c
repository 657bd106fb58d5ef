#include "arith.h"

/* dest = var op const, without touching the register slots. */
CP_BEGIN
    uint64_t r;
    if (cp_binary(CP_A0, CP_A1, &r))
        CP_STOP(0, ST_DIV_ZERO);
    CP_SLOT(CP_V_DEST) = r;
    CP_GOTO(0);
CP_END
