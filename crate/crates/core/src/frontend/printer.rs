use std::fmt::Write;

use crate::lang::{Expr, Function, Literal, Module, Stmt, Target, ValueType};

/// Renders a module as source text that parses back to the same module.
pub fn print(module: &Module) -> String {
    let mut out = String::new();
    for e in &module.externals {
        let params: Vec<&str> = e.params.iter().map(|t| t.name()).collect();
        write!(out, "extern fn {}({})", e.name, params.join(", ")).unwrap();
        if let Some(r) = e.ret {
            write!(out, " -> {r}").unwrap();
        }
        out.push_str(";\n");
    }
    for (i, f) in module.functions.iter().enumerate() {
        if i > 0 || !module.externals.is_empty() {
            out.push('\n');
        }
        Printer { module, func: f, out: &mut out }.function();
    }
    out
}

struct Printer<'a> {
    module: &'a Module,
    func: &'a Function,
    out: &'a mut String,
}

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const ADD: u8 = 4;
const MUL: u8 = 5;
const ATOM: u8 = 6;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Logic { op: crate::lang::LogicOp::Or, .. } => OR,
        Expr::Logic { .. } => AND,
        Expr::Compare { .. } => CMP,
        Expr::Binary { op, .. } => match op {
            crate::lang::BinOp::Add | crate::lang::BinOp::Sub => ADD,
            _ => MUL,
        },
        _ => ATOM,
    }
}

fn literal(out: &mut String, lit: &Literal) {
    let suffix = |t: Option<ValueType>| t.map(|t| t.name()).unwrap_or("");
    match *lit {
        Literal::Int { value, ty } => write!(out, "{value}{}", suffix(ty)).unwrap(),
        Literal::Float { value, ty } => write!(out, "{value:?}{}", suffix(ty)).unwrap(),
        Literal::Bool(b) => write!(out, "{b}").unwrap(),
    }
}

impl Printer<'_> {
    fn function(&mut self) {
        let f = self.func;
        let params: Vec<String> =
            f.locals[..f.params as usize].iter().map(|l| format!("{}: {}", l.name, l.ty)).collect();
        write!(self.out, "fn {}({})", f.name, params.join(", ")).unwrap();
        if let Some(r) = f.ret {
            write!(self.out, " -> {r}").unwrap();
        }
        self.out.push(' ');
        self.block(&f.body, 0);
        self.out.push('\n');
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn block(&mut self, stmts: &[Stmt], depth: usize) {
        if stmts.is_empty() {
            self.out.push_str("{}");
            return;
        }
        self.out.push_str("{\n");
        for s in stmts {
            self.indent(depth + 1);
            self.stmt(s, depth + 1);
            self.out.push('\n');
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        match s {
            Stmt::Declare { local, init } => {
                let l = &self.func.locals[*local as usize];
                write!(self.out, "let {}: {}", l.name, l.ty).unwrap();
                if let Some(e) = init {
                    self.out.push_str(" = ");
                    self.expr(e, 0);
                }
                self.out.push(';');
            }
            Stmt::Assign { target, value } => {
                match target {
                    Target::Var(id) => self.out.push_str(&self.func.locals[*id as usize].name),
                    Target::Index { elem, base, index } => self.index(*elem, base, index),
                }
                self.out.push_str(" = ");
                self.expr(value, 0);
                self.out.push(';');
            }
            Stmt::If { cond, then_body, else_body } => {
                self.out.push_str("if (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(then_body, depth);
                if !else_body.is_empty() {
                    self.out.push_str(" else ");
                    self.block(else_body, depth);
                }
            }
            Stmt::While { cond, body } => {
                self.out.push_str("while (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(body, depth);
            }
            Stmt::Return(None) => self.out.push_str("return;"),
            Stmt::Return(Some(e)) => {
                self.out.push_str("return ");
                self.expr(e, 0);
                self.out.push(';');
            }
            Stmt::Expr(e) => {
                self.expr(e, 0);
                self.out.push(';');
            }
            Stmt::Block(b) => self.block(b, depth),
        }
    }

    fn index(&mut self, elem: ValueType, base: &Expr, index: &Expr) {
        write!(self.out, "{elem}[").unwrap();
        self.expr(base, 0);
        self.out.push_str(", ");
        self.expr(index, 0);
        self.out.push(']');
    }

    fn args(&mut self, name: &str, args: &[Expr]) {
        self.out.push_str(name);
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(a, 0);
        }
        self.out.push(')');
    }

    fn binary(&mut self, sym: &str, p: u8, lhs: &Expr, rhs: &Expr) {
        // Comparisons do not chain, so both sides bind tighter.
        let left = if p == CMP { p + 1 } else { p };
        self.expr(lhs, left);
        write!(self.out, " {sym} ").unwrap();
        self.expr(rhs, p + 1);
    }

    fn expr(&mut self, e: &Expr, min: u8) {
        let p = prec(e);
        if p < min {
            self.out.push('(');
            self.expr(e, 0);
            self.out.push(')');
            return;
        }
        match e {
            Expr::Literal(lit) => literal(self.out, lit),
            Expr::Var(id) => self.out.push_str(&self.func.locals[*id as usize].name),
            Expr::Binary { op, lhs, rhs } => self.binary(op.symbol(), p, lhs, rhs),
            Expr::Compare { op, lhs, rhs } => self.binary(op.symbol(), p, lhs, rhs),
            Expr::Logic { op, lhs, rhs } => self.binary(op.symbol(), p, lhs, rhs),
            Expr::Call { func, args } => {
                let name = &self.module.functions[*func as usize].name;
                self.args(name, args)
            }
            Expr::ExternalCall { ext, args } => {
                let name = &self.module.externals[*ext as usize].name;
                self.args(name, args)
            }
            Expr::Index { elem, base, index } => self.index(*elem, base, index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    const FIB: &str = "fn fib(n: i32) -> i32 { if (n <= 2) { return 1; } return fib(n-1) + fib(n-2); }";

    #[test]
    fn empty_module_prints_nothing() {
        assert_eq!(print(&Module::default()), "");
    }

    #[test]
    fn fib_prints_one_if() {
        let text = print(&parse(FIB).unwrap());
        let ifs = text.split(|c: char| !c.is_alphanumeric() && c != '_').filter(|w| *w == "if").count();
        assert_eq!(ifs, 1);
        assert_eq!(
            text,
            "fn fib(n: i32) -> i32 {\n    if (n <= 2) {\n        return 1;\n    }\n    return fib(n - 1) + fib(n - 2);\n}\n"
        );
    }

    #[test]
    fn parentheses_only_where_needed() {
        let src = "fn f(a: i64, b: i64) -> i64 { return (a - (b - 1)) * (a + b) / -3; }";
        let text = print(&parse(src).unwrap());
        assert!(text.contains("return (a - (b - 1)) * (a + b) / -3;"), "{text}");
        assert_eq!(parse(&text).unwrap(), parse(src).unwrap());
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1f64, -0.0, 1e300, 5e-324, 123456.789, -2.5e-10] {
            let m = parse(&format!("fn f() -> f64 {{ return {v:?}; }}")).unwrap();
            let Stmt::Return(Some(Expr::Literal(Literal::Float { value, .. }))) = &m.functions[0].body[0] else {
                panic!()
            };
            assert_eq!(value.to_bits(), v.to_bits());
            assert_eq!(parse(&print(&m)).unwrap(), m);
        }
    }

    #[test]
    fn externs_and_suffixes_round_trip() {
        let src = "extern fn put(i64, f64);\nfn g(p: ptr) -> bool { put(3i64, 2f64); let z: bool; return true && z || f64[p, 0] > 1.5f64; }";
        let m = parse(src).unwrap();
        assert_eq!(parse(&print(&m)).unwrap(), m);
    }
}
