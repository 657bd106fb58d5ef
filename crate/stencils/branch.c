#include "cp.h"

/* Continuation 0 when the condition holds, 1 otherwise. The condition goes
 * through an empty asm so the false path cannot assume the slot is zero and
 * rematerialize it. */
CP_CONDITIONAL CP_BEGIN
    uint64_t c = CP_A0;
    __asm__("" : "+r"(c));
    if (c)
        CP_GOTO(0);
    CP_GOTO(1);
CP_END
