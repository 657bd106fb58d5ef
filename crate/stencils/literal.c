#include "cp.h"

CP_BEGIN
    CP_RESULT(CP_A0);
    CP_GOTO(0);
CP_END
