#include "cp.h"

/* Called from the host with no arguments; starts the function at the base
 * of the frame pool, where the host left the arguments. */
CP_BEGIN
    __attribute__((musttail)) return CP_ENTER(0, (uint8_t *)CP_IMM64(CP_V_POOL));
CP_END
