#include "arith.h"

CP_CONDITIONAL CP_BEGIN
    if (cp_compare(CP_A0, CP_A1))
        CP_GOTO(0);
    CP_GOTO(1);
CP_END
