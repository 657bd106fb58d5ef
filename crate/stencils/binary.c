#include "arith.h"

CP_BEGIN
    uint64_t r;
    if (cp_binary(CP_A0, CP_A1, &r))
        CP_STOP(0, ST_DIV_ZERO);
    CP_RESULT(r);
    CP_GOTO(0);
CP_END
