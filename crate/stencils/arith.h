/* Arithmetic and comparison on canonical operands of type CP_TYPE.
 * Integers wrap, including MIN / -1; only a zero divisor fails. */
#ifndef CP_ARITH_H
#define CP_ARITH_H

#include "cp.h"

/* Returns nonzero on a zero divisor. That exit is marked likely only so
 * that it is laid out first and the jump to continuation 0 stays last. */
static inline int cp_binary(uint64_t a, uint64_t b, uint64_t *r) {
#if CP_TYPE == T_F64
    double x = cp_f64(a), y = cp_f64(b);
#if CP_OP == OP_ADD
    *r = cp_bits(x + y);
#elif CP_OP == OP_SUB
    *r = cp_bits(x - y);
#else
    *r = cp_bits(x * y);
#endif
#elif CP_TYPE == T_I32
    uint32_t x = (uint32_t)a, y = (uint32_t)b;
#if CP_OP == OP_ADD
    *r = cp_i32((int32_t)(x + y));
#elif CP_OP == OP_SUB
    *r = cp_i32((int32_t)(x - y));
#elif CP_OP == OP_MUL
    *r = cp_i32((int32_t)(x * y));
#else
    if (__builtin_expect(y == 0, 1))
        return 1;
    /* Dividing by 1 instead of -1 and negating avoids the MIN / -1 fault
     * without another exit path. */
    int neg = (int32_t)y == -1;
    int32_t d = neg ? 1 : (int32_t)y;
#if CP_OP == OP_DIV
    uint32_t q = (uint32_t)((int32_t)x / d);
    *r = cp_i32((int32_t)(neg ? 0u - q : q));
#else
    *r = cp_i32((int32_t)x % d);
#endif
#endif
#else
#if CP_OP == OP_ADD
    *r = a + b;
#elif CP_OP == OP_SUB
    *r = a - b;
#elif CP_OP == OP_MUL
    *r = a * b;
#else
    if (__builtin_expect(b == 0, 1))
        return 1;
    int neg = (int64_t)b == -1;
    int64_t d = neg ? 1 : (int64_t)b;
#if CP_OP == OP_DIV
    uint64_t q = (uint64_t)((int64_t)a / d);
    *r = neg ? 0 - q : q;
#else
    *r = (uint64_t)((int64_t)a % d);
#endif
#endif
#endif
    return 0;
}

static inline int cp_compare(uint64_t a, uint64_t b) {
#if CP_TYPE == T_F64
    double x = cp_f64(a), y = cp_f64(b);
#elif CP_TYPE == T_PTR || CP_TYPE == T_BOOL
    uint64_t x = a, y = b;
#else
    int64_t x = (int64_t)a, y = (int64_t)b;
#endif
#if CP_OP == OP_EQ
    return x == y;
#elif CP_OP == OP_NE
    return x != y;
#elif CP_OP == OP_LT
    return x < y;
#elif CP_OP == OP_LE
    return x <= y;
#elif CP_OP == OP_GT
    return x > y;
#else
    return x >= y;
#endif
}

#endif
