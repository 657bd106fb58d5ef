#include "cp.h"

typedef _Bool cp_host_fn(uint64_t *args);

/* Host functions take the argument block, write the result to its first
 * slot and return true on failure. */
CP_BEGIN
    uint64_t *block = (uint64_t *)(frame + CP_OFF(CP_V_DELTA));
    if ((uintptr_t)block + CP_OFF(CP_V_NEED) > CP_IMM64(CP_V_LIMIT))
        CP_STOP(0, ST_OVERFLOW);
    cp_host_fn *f = (cp_host_fn *)CP_IMM64(CP_V_ADAPTER);
    if (f(block))
        CP_STOP(0, ST_EXTERNAL);
    CP_RESULT(block[0]);
    CP_GOTO(0);
CP_END
