#include "cp.h"

typedef int32_t u_i32 __attribute__((aligned(1)));
typedef uint64_t u_u64 __attribute__((aligned(1)));

CP_BEGIN
    uint8_t *base = (uint8_t *)CP_A0;
    uint64_t i = CP_A1;
#if CP_TYPE == T_I32
    uint64_t v = cp_i32(*(u_i32 *)(base + i * 4));
#elif CP_TYPE == T_BOOL
    uint64_t v = base[i] != 0;
#else
    uint64_t v = *(u_u64 *)(base + i * 8);
#endif
    CP_RESULT(v);
    CP_GOTO(0);
CP_END
