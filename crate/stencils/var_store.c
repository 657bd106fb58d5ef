#include "cp.h"

CP_BEGIN
    CP_SLOT(CP_V_DEST) = CP_A0;
    CP_GOTO(0);
CP_END
