/* Shared conventions for stencil sources.
 *
 * Every stencil is `cp_ret f(frame, s0..s4)`: the frame base and five
 * register temp slots. Continuations are tail calls to __cp_cont_<n>; a
 * stencil that stops the chain returns a value and a status word.
 *
 * The build passes the key as -D definitions: CP_KIND, CP_OP, CP_TYPE,
 * CP_NOPS, CP_LOC<i>, CP_PT, CP_SPILL, CP_SYMBOL, and the ordinal of each
 * value hole as CP_V_<ROLE>.
 */
#ifndef CP_H
#define CP_H

#include <stdint.h>

typedef struct {
    uint64_t value;
    uint64_t status;
} cp_ret;

#define CP_PARAMS uint8_t *frame, uint64_t s0, uint64_t s1, uint64_t s2, uint64_t s3, uint64_t s4
typedef cp_ret cp_fn(CP_PARAMS);
extern cp_fn __cp_cont_0, __cp_cont_1;

/* Tags of the key encoding. */
#define T_I32 0
#define T_I64 1
#define T_F64 2
#define T_BOOL 3
#define T_PTR 4

#define L_REG 0
#define L_STACK 1
#define L_LIT 2

#define K_INDEX_LOAD 10
#define K_INDEX_STORE 11

#define OP_ADD 0
#define OP_SUB 1
#define OP_MUL 2
#define OP_DIV 3
#define OP_MOD 4

#define OP_EQ 0
#define OP_NE 1
#define OP_LT 2
#define OP_LE 3
#define OP_GT 4
#define OP_GE 5

#define ST_OK 0
#define ST_EXTERNAL 1
#define ST_DIV_ZERO 2
#define ST_OVERFLOW 3

#define CP_CAT_(a, b) a##b
#define CP_CAT(a, b) CP_CAT_(a, b)
#define CP_STR_(x) #x
#define CP_STR(x) CP_STR_(x)

/* Small holes are symbol addresses, so the compiler folds them into
 * displacements and immediates. */
extern uint8_t __cp_val_0[], __cp_val_1[], __cp_val_2[], __cp_val_3[];
extern uint8_t __cp_val_4[], __cp_val_5[], __cp_val_6[], __cp_val_7[];
#define CP_OFF(n) ((uintptr_t)CP_CAT(__cp_val_, n))
#define CP_SLOT(n) (*(uint64_t *)(frame + CP_OFF(n)))

/* Constants go through opaque asm so nothing is assumed about their value.
 * Narrow constants are sign-extended imm32 fields, which is the canonical
 * form of i32 and bool values. */
#define CP_IMM32(n) ({ \
    uint64_t v_; \
    __asm__("movq $" CP_STR(CP_CAT(__cp_val_, n)) ", %0" : "=r"(v_)); \
    v_; })
#define CP_IMM64(n) ({ \
    uint64_t v_; \
    __asm__("movabsq $" CP_STR(CP_CAT(__cp_val_, n)) ", %0" : "=r"(v_)); \
    v_; })

#define CP_NARROW(t) ((t) == T_I32 || (t) == T_BOOL)

/* Operand types. */
#if CP_KIND == K_INDEX_LOAD || CP_KIND == K_INDEX_STORE
#define CP_TY0 T_PTR
#define CP_TY1 T_I64
#else
#define CP_TY0 CP_TYPE
#define CP_TY1 CP_TYPE
#endif
#define CP_TY2 CP_TYPE

/* Register operands occupy the slots just above the pass-through ones, in
 * operand order. */
#define CP_REGS_BEFORE1 (CP_LOC0 == L_REG)
#define CP_REGS_BEFORE2 (CP_REGS_BEFORE1 + (CP_LOC1 == L_REG))

#if CP_NOPS > 0
#if CP_LOC0 == L_REG
#define CP_A0 s[CP_PT]
#elif CP_LOC0 == L_STACK
#define CP_A0 CP_SLOT(CP_V_OP0)
#elif CP_NARROW(CP_TY0)
#define CP_A0 CP_IMM32(CP_V_OP0)
#else
#define CP_A0 CP_IMM64(CP_V_OP0)
#endif
#endif

#if CP_NOPS > 1
#if CP_LOC1 == L_REG
#define CP_A1 s[CP_PT + CP_REGS_BEFORE1]
#elif CP_LOC1 == L_STACK
#define CP_A1 CP_SLOT(CP_V_OP1)
#elif CP_NARROW(CP_TY1)
#define CP_A1 CP_IMM32(CP_V_OP1)
#else
#define CP_A1 CP_IMM64(CP_V_OP1)
#endif
#endif

#if CP_NOPS > 2
#if CP_LOC2 == L_REG
#define CP_A2 s[CP_PT + CP_REGS_BEFORE2]
#elif CP_LOC2 == L_STACK
#define CP_A2 CP_SLOT(CP_V_OP2)
#elif CP_NARROW(CP_TY2)
#define CP_A2 CP_IMM32(CP_V_OP2)
#else
#define CP_A2 CP_IMM64(CP_V_OP2)
#endif
#endif

#if CP_KIND == 0 || CP_KIND == 1 || CP_KIND == 3 || CP_KIND == 4 || CP_KIND == 7 || CP_KIND == 8 || CP_KIND == 10
#define CP_PRODUCES 1
#else
#define CP_PRODUCES 0
#endif

/* Slots still holding values after this node: the pass-through ones and a
 * register result. The rest are handed on undefined so the compiler never
 * preserves them. */
#define CP_LIVE (CP_PT + (CP_PRODUCES && !CP_SPILL))

#pragma clang diagnostic ignored "-Wuninitialized"

#define CP_BEGIN cp_ret CP_SYMBOL(CP_PARAMS) { \
    uint64_t s[5] = {s0, s1, s2, s3, s4}; \
    uint64_t dead_; \
    (void)s;

#define CP_END }

/* Leaves the node's result in slot CP_PT or in its spill slot. */
#if CP_SPILL
#define CP_RESULT(v) (CP_SLOT(CP_V_SPILL) = (v))
#else
#define CP_RESULT(v) (s[CP_PT] = (v))
#endif

#define CP_OUT(i) ((i) < CP_LIVE ? s[i] : dead_)
#define CP_GOTO(k) __attribute__((musttail)) return __cp_cont_##k(frame, CP_OUT(0), CP_OUT(1), CP_OUT(2), CP_OUT(3), CP_OUT(4))
#define CP_ENTER(k, f) __cp_cont_##k((f), dead_, dead_, dead_, dead_, dead_)

/* Under minsize clang turns `if (c) goto 0; goto 1;` into a conditional
 * jump to continuation 1 followed by an elidable jump to continuation 0. */
#define CP_CONDITIONAL __attribute__((minsize))
#define CP_STOP(v, st) return (cp_ret){(v), (st)}

static inline double cp_f64(uint64_t b) {
    union { uint64_t u; double d; } x = {.u = b};
    return x.d;
}

static inline uint64_t cp_bits(double d) {
    union { double d; uint64_t u; } x = {.d = d};
    return x.u;
}

static inline uint64_t cp_i32(int32_t v) {
    return (uint64_t)(int64_t)v;
}

#endif
