#include "cp.h"

CP_BEGIN
    CP_STOP(CP_A0, ST_OK);
CP_END
