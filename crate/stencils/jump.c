#include "cp.h"

CP_BEGIN
    CP_GOTO(0);
CP_END
