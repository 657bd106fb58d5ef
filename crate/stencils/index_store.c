#include "cp.h"

typedef int32_t u_i32 __attribute__((aligned(1)));
typedef uint64_t u_u64 __attribute__((aligned(1)));

CP_BEGIN
    uint8_t *base = (uint8_t *)CP_A0;
    uint64_t i = CP_A1;
    uint64_t v = CP_A2;
#if CP_TYPE == T_I32
    *(u_i32 *)(base + i * 4) = (int32_t)v;
#elif CP_TYPE == T_BOOL
    base[i] = v != 0;
#else
    *(u_u64 *)(base + i * 8) = v;
#endif
    CP_GOTO(0);
CP_END
