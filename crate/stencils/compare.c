#include "arith.h"

CP_BEGIN
    CP_RESULT((uint64_t)cp_compare(CP_A0, CP_A1));
    CP_GOTO(0);
CP_END
