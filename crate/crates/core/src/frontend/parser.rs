use rustc_hash::FxHashMap;

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, SourceSpan};
use crate::lang::{
    BinOp, CmpOp, Expr, ExternDecl, Function, Literal, Local, LocalId, LogicOp, Module, Stmt, Target, ValueType,
};

type Result<T> = std::result::Result<T, ParseError>;

#[derive(Clone, Copy)]
enum Callee {
    Func(u32),
    Extern(u32),
}

/// Parses a whole module. Names are resolved here: an unknown local or
/// function is reported as a syntax error at its use.
pub fn parse(src: &str) -> Result<Module> {
    let toks = tokenize(src)?;
    let callees = collect_callees(&toks)?;
    let mut p = Parser { toks, pos: 0, callees, locals: Vec::new(), bindings: Vec::new(), marks: Vec::new() };
    p.module()
}

fn collect_callees<'s>(toks: &[Token<'s>]) -> Result<FxHashMap<&'s str, Callee>> {
    let mut map = FxHashMap::default();
    let (mut funcs, mut exts) = (0u32, 0u32);
    for (i, w) in toks.windows(2).enumerate() {
        if let (Tok::Fn, Tok::Ident(name)) = (w[0].tok, w[1].tok) {
            let callee = if i > 0 && toks[i - 1].tok == Tok::Extern {
                exts += 1;
                Callee::Extern(exts - 1)
            } else {
                funcs += 1;
                Callee::Func(funcs - 1)
            };
            if map.insert(name, callee).is_some() {
                return Err(ParseError {
                    span: w[1].span,
                    expected: vec![],
                    found: format!("second definition of `{name}`"),
                });
            }
        }
    }
    Ok(map)
}

struct Parser<'s> {
    toks: Vec<Token<'s>>,
    pos: usize,
    callees: FxHashMap<&'s str, Callee>,
    locals: Vec<Local>,
    bindings: Vec<(&'s str, LocalId)>,
    marks: Vec<usize>,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> Tok<'s> {
        self.toks[self.pos].tok
    }

    fn peek2(&self) -> Tok<'s> {
        self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token<'s> {
        let t = self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(ParseError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn fail_at<T>(&self, span: SourceSpan, found: String) -> Result<T> {
        Err(ParseError { span, expected: vec![], found })
    }

    fn eat(&mut self, t: Tok<'s>) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok<'s>) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.fail(&[&format!("`{}`", t.text())])
        }
    }

    fn ident(&mut self) -> Result<&'s str> {
        match self.peek() {
            Tok::Ident(s) if ValueType::from_name(s).is_none() => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn ty(&mut self) -> Result<ValueType> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(t) = ValueType::from_name(s) {
                self.bump();
                return Ok(t);
            }
        }
        self.fail(&["type"])
    }

    fn ret_ty(&mut self) -> Result<Option<ValueType>> {
        if self.eat(Tok::Arrow) {
            Ok(Some(self.ty()?))
        } else {
            Ok(None)
        }
    }

    fn module(&mut self) -> Result<Module> {
        let mut m = Module::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(m),
                Tok::Extern => m.externals.push(self.extern_decl()?),
                Tok::Fn => m.functions.push(self.function()?),
                _ => return self.fail(&["`fn`", "`extern`"]),
            }
        }
    }

    fn extern_decl(&mut self) -> Result<ExternDecl> {
        self.expect(Tok::Extern)?;
        self.expect(Tok::Fn)?;
        let name = self.ident()?.to_string();
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(Tok::RParen) {
            loop {
                params.push(self.ty()?);
                if self.eat(Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        let ret = self.ret_ty()?;
        self.expect(Tok::Semi)?;
        Ok(ExternDecl { name, params, ret })
    }

    fn function(&mut self) -> Result<Function> {
        self.expect(Tok::Fn)?;
        let name = self.ident()?.to_string();
        self.locals.clear();
        self.bindings.clear();
        self.marks.clear();
        self.expect(Tok::LParen)?;
        if !self.eat(Tok::RParen) {
            loop {
                let pname = match self.peek() {
                    Tok::Ident(s) if ValueType::from_name(s).is_none() => {
                        self.bump();
                        s
                    }
                    _ => return self.fail(&["parameter name", "`)`"]),
                };
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.declare(pname, ty);
                if self.eat(Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        let params = self.locals.len() as u32;
        let ret = self.ret_ty()?;
        let body = self.block()?;
        Ok(Function { name, params, ret, locals: std::mem::take(&mut self.locals), body })
    }

    fn declare(&mut self, name: &'s str, ty: ValueType) -> LocalId {
        let id = self.locals.len() as LocalId;
        self.locals.push(Local { name: name.to_string(), ty });
        self.bindings.push((name, id));
        id
    }

    fn lookup(&self, name: &str) -> Option<LocalId> {
        self.bindings.iter().rev().find(|(n, _)| *n == name).map(|&(_, id)| id)
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        self.marks.push(self.bindings.len());
        let mut out = Vec::new();
        while !self.eat(Tok::RBrace) {
            if self.peek() == Tok::Eof {
                return self.fail(&["`}`"]);
            }
            out.push(self.stmt()?);
        }
        let mark = self.marks.pop().unwrap();
        self.bindings.truncate(mark);
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        match self.peek() {
            Tok::Let => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                let init = if self.eat(Tok::Assign) { Some(self.expr()?) } else { None };
                self.expect(Tok::Semi)?;
                let local = self.declare(name, ty);
                Ok(Stmt::Declare { local, init })
            }
            Tok::If => self.if_stmt(),
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::Return => {
                self.bump();
                if self.eat(Tok::Semi) {
                    return Ok(Stmt::Return(None));
                }
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return(Some(e)))
            }
            Tok::LBrace => Ok(Stmt::Block(self.block()?)),
            _ => {
                let start = self.span();
                let e = self.expr()?;
                if self.eat(Tok::Assign) {
                    let target = match e {
                        Expr::Var(id) => Target::Var(id),
                        Expr::Index { elem, base, index } => Target::Index { elem, base: *base, index: *index },
                        _ => return self.fail_at(start, "assignment to a non-variable".into()),
                    };
                    let value = self.expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Assign { target, value })
                } else {
                    if self.peek() != Tok::Semi {
                        return self.fail(&["`;`", "`=`"]);
                    }
                    self.bump();
                    Ok(Stmt::Expr(e))
                }
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt> {
        self.expect(Tok::If)?;
        self.expect(Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(Tok::RParen)?;
        let then_body = self.block()?;
        let else_body = if self.eat(Tok::Else) {
            if self.peek() == Tok::If {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If { cond, then_body, else_body })
    }

    pub(super) fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::logic(LogicOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(Tok::AndAnd) {
            let rhs = self.cmp_expr()?;
            lhs = Expr::logic(LogicOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let Some(op) = self.cmp_op() else { return Ok(lhs) };
        self.bump();
        let rhs = self.add_expr()?;
        if self.cmp_op().is_some() {
            return self.fail_at(self.span(), "chained comparison".into());
        }
        Ok(Expr::compare(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.primary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn number(&mut self, negative: bool) -> Result<Expr> {
        let span = self.span();
        let suffix_ty = |s: Option<&str>| s.and_then(ValueType::from_name);
        match self.bump().tok {
            Tok::Int(mag, suffix) => {
                let value = if negative {
                    if mag > 1u64 << 63 {
                        return self.fail_at(span, "integer literal out of range".into());
                    }
                    (mag as i64).wrapping_neg()
                } else {
                    if mag > i64::MAX as u64 {
                        return self.fail_at(span, "integer literal out of range".into());
                    }
                    mag as i64
                };
                Ok(Expr::Literal(Literal::Int { value, ty: suffix_ty(suffix) }))
            }
            Tok::Float(v, suffix) => {
                let value = if negative { -v } else { v };
                Ok(Expr::Literal(Literal::Float { value, ty: suffix_ty(suffix) }))
            }
            _ => unreachable!(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                match self.peek() {
                    Tok::Int(..) | Tok::Float(..) => self.number(true),
                    _ => self.fail(&["number"]),
                }
            }
            Tok::Int(..) | Tok::Float(..) => self.number(false),
            Tok::True => {
                self.bump();
                Ok(Expr::Literal(Literal::Bool(true)))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::Literal(Literal::Bool(false)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(elem) = ValueType::from_name(name) {
                    self.bump();
                    self.expect(Tok::LBracket)?;
                    let base = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let index = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    return Ok(Expr::Index { elem, base: Box::new(base), index: Box::new(index) });
                }
                let span = self.span();
                if self.peek2() == Tok::LParen {
                    let Some(&callee) = self.callees.get(name) else {
                        return self.fail_at(span, format!("unknown function `{name}`"));
                    };
                    self.bump();
                    self.bump();
                    let mut args = Vec::new();
                    if !self.eat(Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma)?;
                        }
                    }
                    return Ok(match callee {
                        Callee::Func(func) => Expr::Call { func, args },
                        Callee::Extern(ext) => Expr::ExternalCall { ext, args },
                    });
                }
                self.bump();
                match self.lookup(name) {
                    Some(id) => Ok(Expr::Var(id)),
                    None => self.fail_at(span, format!("unknown variable `{name}`")),
                }
            }
            _ => self.fail(&["expression"]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIB: &str = "fn fib(n: i32) -> i32 { if (n <= 2) { return 1; } return fib(n-1) + fib(n-2); }";

    #[test]
    fn empty_input_is_empty_module() {
        assert_eq!(parse("").unwrap(), Module::default());
        assert_eq!(parse("  // only a comment\n").unwrap(), Module::default());
    }

    #[test]
    fn fib_has_expected_shape() {
        let m = parse(FIB).unwrap();
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions[0];
        assert_eq!((f.params, f.ret), (1, Some(ValueType::I32)));
        assert_eq!(f.body.len(), 2);
        let Stmt::If { cond, then_body, else_body } = &f.body[0] else { panic!() };
        assert_eq!(*cond, Expr::compare(CmpOp::Le, Expr::var(0), Expr::int(2)));
        assert_eq!(*then_body, vec![Stmt::Return(Some(Expr::int(1)))]);
        assert!(else_body.is_empty());
        let Stmt::Return(Some(Expr::Binary { op: BinOp::Add, lhs, rhs })) = &f.body[1] else { panic!() };
        assert_eq!(**lhs, Expr::call(0, vec![Expr::binary(BinOp::Sub, Expr::var(0), Expr::int(1))]));
        assert!(matches!(**rhs, Expr::Call { func: 0, .. }));
    }

    #[test]
    fn malformed_parameter_list_reports_offset() {
        let err = parse("fn f( {").unwrap_err();
        assert_eq!(err.span.start, 6);
        assert_eq!((err.span.line, err.span.column), (1, 7));
        assert!(err.expected.iter().any(|e| e.contains(')')));
    }

    #[test]
    fn precedence_and_associativity() {
        let m = parse("fn f(a: i64, b: i64) -> i64 { return a - b - 1 * a % 3; }").unwrap();
        let Stmt::Return(Some(e)) = &m.functions[0].body[0] else { panic!() };
        let expected = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, Expr::var(0), Expr::var(1)),
            Expr::binary(BinOp::Mod, Expr::binary(BinOp::Mul, Expr::int(1), Expr::var(0)), Expr::int(3)),
        );
        assert_eq!(*e, expected);
    }

    #[test]
    fn logic_binds_looser_than_comparison() {
        let m = parse("fn f(a: i32) -> bool { return a < 1 || a > 2 && a != 5; }").unwrap();
        let Stmt::Return(Some(Expr::Logic { op: LogicOp::Or, rhs, .. })) = &m.functions[0].body[0] else { panic!() };
        assert!(matches!(**rhs, Expr::Logic { op: LogicOp::And, .. }));
    }

    #[test]
    fn chained_comparison_is_rejected() {
        assert!(parse("fn f(a: i32) -> bool { return a < 1 < 2; }").is_err());
    }

    #[test]
    fn shadowing_allocates_new_slots() {
        let src = "fn f(x: i32) -> i32 { let x: i64 = 1; { let x: i32 = 2; } return 0; }";
        let f = &parse(src).unwrap().functions[0];
        assert_eq!(f.locals.len(), 3);
        assert_eq!(f.locals[1].ty, ValueType::I64);
    }

    #[test]
    fn let_initializer_sees_outer_binding() {
        let f = &parse("fn f(x: i32) { let x: i32 = x; }").unwrap().functions[0];
        assert_eq!(f.body[0], Stmt::Declare { local: 1, init: Some(Expr::var(0)) });
    }

    #[test]
    fn unknown_names_are_errors() {
        let err = parse("fn f() -> i32 { return y; }").unwrap_err();
        assert_eq!(err.span.start, 23);
        assert!(parse("fn f() { g(); }").is_err());
        assert!(parse("fn f() { { let y: i32 = 1; } y = 2; }").is_err());
    }

    #[test]
    fn forward_calls_and_externs_resolve() {
        let src = "fn a() -> i64 { return b(); } extern fn h(i64) -> i64; fn b() -> i64 { return h(1); }";
        let m = parse(src).unwrap();
        assert_eq!(m.externals.len(), 1);
        assert!(matches!(&m.functions[0].body[0], Stmt::Return(Some(Expr::Call { func: 1, .. }))));
        assert!(matches!(&m.functions[1].body[0], Stmt::Return(Some(Expr::ExternalCall { ext: 0, .. }))));
    }

    #[test]
    fn index_expressions_and_targets() {
        let src = "fn f(p: ptr, i: i64) { i32[p, i] = i32[p, i + 1]; }";
        let f = &parse(src).unwrap().functions[0];
        let Stmt::Assign { target: Target::Index { elem, .. }, value } = &f.body[0] else { panic!() };
        assert_eq!(*elem, ValueType::I32);
        assert!(matches!(value, Expr::Index { elem: ValueType::I32, .. }));
    }

    #[test]
    fn negative_literals() {
        let src = "fn f() -> i64 { return -9223372036854775808 - -1; }";
        let Stmt::Return(Some(Expr::Binary { lhs, rhs, .. })) = &parse(src).unwrap().functions[0].body[0] else {
            panic!()
        };
        assert_eq!(**lhs, Expr::int(i64::MIN));
        assert_eq!(**rhs, Expr::int(-1));
        assert!(parse("fn f() -> i64 { return 9223372036854775808; }").is_err());
        assert!(parse("fn f(a: i64) -> i64 { return -a; }").is_err());
    }

    #[test]
    fn duplicate_function_is_rejected() {
        assert!(parse("fn f() {} fn f() {}").is_err());
    }

    #[test]
    fn else_if_chains() {
        let src = "fn f(a: i32) -> i32 { if (a == 1) { return 1; } else if (a == 2) { return 2; } return 3; }";
        let Stmt::If { else_body, .. } = &parse(src).unwrap().functions[0].body[0] else { panic!() };
        assert!(matches!(else_body.as_slice(), [Stmt::If { .. }]));
    }
}
