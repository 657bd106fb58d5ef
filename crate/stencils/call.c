#include "cp.h"

/* The arguments already sit at the start of the callee frame. The callee
 * clobbers every slot, so only pass-through slots survive, saved by the
 * compiler across the call. */
CP_BEGIN
    uint8_t *callee = frame + CP_OFF(CP_V_DELTA);
    if ((uintptr_t)callee + CP_OFF(CP_V_NEED) > CP_IMM64(CP_V_LIMIT))
        CP_STOP(0, ST_OVERFLOW);
    cp_ret r = CP_ENTER(1, callee);
    if (r.status != ST_OK)
        return r;
    CP_RESULT(r.value);
    CP_GOTO(0);
CP_END
