//! Recursive-descent parser.
//!
//! ```text
//! program   := classDef* sequence
//! classDef  := "class" IDENT ("extends" IDENT)? "[" ("|" IDENT* "|")? methodDef* "]"
//! methodDef := pattern "[" ("|" IDENT* "|")? sequence "]"
//! sequence  := statement ("." statement)* "."?
//! statement := "^" expr | expr
//! expr      := IDENT ":=" expr | keywordSend
//! ```

use std::rc::Rc;

use thiserror::Error;

use crate::ast::{Literal, Node, NodeId, NodeKind, Program, SourceSpan};
use crate::lexer::{tokenize, Tok, Token};
use crate::symbol::Sym;

#[derive(Clone, Debug, Error, PartialEq)]
#[error("syntax error at {span}: {message}")]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub message: String,
}

/// Hands out node ids. One generator per interpreter keeps ids unique
/// across every program and method it ever parsed.
#[derive(Clone, Debug)]
pub struct IdGen {
    next: u32,
}

impl Default for IdGen {
    fn default() -> Self {
        IdGen { next: 1 }
    }
}

impl IdGen {
    pub fn starting_at(first: NodeId) -> IdGen {
        IdGen { next: first.0 }
    }

    pub fn peek(&self) -> NodeId {
        NodeId(self.next)
    }

    fn alloc(&mut self) -> NodeId {
        let id = NodeId(self.next);
        self.next += 1;
        id
    }
}

/// Parses a standalone program with a private id space.
pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    parse_program(source, Sym::new("<input>"), &mut IdGen::default())
}

pub fn parse_program(source: &str, file: Sym, ids: &mut IdGen) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source, 0, file)?;
    let mut ids_scratch = ids.clone();
    let mut parser = Parser { tokens, pos: 0, file, ids: &mut ids_scratch };
    let mut classes = Vec::new();
    while parser.at_class_def() {
        classes.push(parser.class_def()?);
    }
    let temps = parser.temps()?.iter().filter_map(|t| t.var_name()).collect();
    let body = parser.sequence(&[Tok::Eof])?;
    parser.expect(&Tok::Eof, "end of input")?;
    *ids = ids_scratch;
    Ok(Program { classes, temps, body, source: Rc::from(source), file })
}

/// Parses exactly one method definition. `offset` is the position of
/// `source` inside its file, so spans stay file-relative.
pub fn parse_method(source: &str, offset: usize, file: Sym, ids: &mut IdGen) -> Result<Rc<Node>, SyntaxError> {
    let tokens = tokenize(source, offset, file)?;
    let mut ids_scratch = ids.clone();
    let mut parser = Parser { tokens, pos: 0, file, ids: &mut ids_scratch };
    let method = parser.method_def()?;
    parser.expect(&Tok::Eof, "end of method")?;
    *ids = ids_scratch;
    Ok(method)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    file: Sym,
    ids: &'a mut IdGen,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn token(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            self.tokens[0].start
        } else {
            self.tokens[self.pos - 1].end
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        let t = self.token();
        Err(SyntaxError { span: SourceSpan::new(t.start, t.end, self.file), message: message.into() })
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Token, SyntaxError> {
        if self.peek() == tok {
            Ok(self.bump())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn node(&mut self, lo: NodeId, start: usize, kind: NodeKind) -> Rc<Node> {
        let id = self.ids.alloc();
        let end = self.prev_end().max(start);
        Rc::new(Node { id, lo, span: SourceSpan::new(start, end, self.file), kind })
    }

    fn at_class_def(&self) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == "class")
            && matches!(self.peek_at(1), Tok::Ident(_))
            && (matches!(self.peek_at(2), Tok::LBracket)
                || matches!(self.peek_at(2), Tok::Ident(w) if w == "extends"))
    }

    fn ident(&mut self, what: &str) -> Result<Sym, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Sym::new(&name))
            }
            other => self.error(format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn class_def(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let lo = self.ids.peek();
        let start = self.bump().start;
        let name = self.ident("class name")?;
        let superclass = if matches!(self.peek(), Tok::Ident(w) if w == "extends") {
            self.bump();
            Some(self.ident("superclass name")?)
        } else {
            None
        };
        self.expect(&Tok::LBracket, "'['")?;
        let mut slots = Vec::new();
        if self.peek() == &Tok::Pipe {
            self.bump();
            while let Tok::Ident(_) = self.peek() {
                slots.push(self.ident("slot name")?);
            }
            self.expect(&Tok::Pipe, "'|' closing the slot list")?;
        }
        let mut methods = Vec::new();
        while self.peek() != &Tok::RBracket {
            if self.peek() == &Tok::Eof {
                return self.error("unterminated class definition");
            }
            methods.push(self.method_def()?);
        }
        self.bump();
        Ok(self.node(lo, start, NodeKind::ClassDef { name, superclass, slots, methods }))
    }

    fn method_def(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let lo = self.ids.peek();
        let start = self.token().start;
        let (selector, params) = match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                (Sym::new(&name), Vec::new())
            }
            Tok::Binary(op) => {
                self.bump();
                let param = self.ident("parameter name")?;
                (Sym::new(&op), vec![param])
            }
            Tok::Keyword(_) => {
                let mut selector = String::new();
                let mut params = Vec::new();
                while let Tok::Keyword(part) = self.peek().clone() {
                    self.bump();
                    selector.push_str(&part);
                    params.push(self.ident("parameter name")?);
                }
                (Sym::new(&selector), params)
            }
            other => return self.error(format!("expected method pattern, found {}", describe(&other))),
        };
        self.expect(&Tok::LBracket, "'[' opening the method body")?;
        let temps = self.temps()?;
        let body = self.sequence(&[Tok::RBracket])?;
        self.expect(&Tok::RBracket, "']' closing the method body")?;
        Ok(self.node(lo, start, NodeKind::MethodDef { selector, params, temps, body }))
    }

    fn temps(&mut self) -> Result<Vec<Rc<Node>>, SyntaxError> {
        let mut temps = Vec::new();
        if self.peek() != &Tok::Pipe {
            return Ok(temps);
        }
        self.bump();
        while let Tok::Ident(name) = self.peek().clone() {
            let t = self.bump();
            let lo = self.ids.peek();
            temps.push(self.node(lo, t.start, NodeKind::TempDecl { name: Sym::new(&name) }));
        }
        self.expect(&Tok::Pipe, "'|' closing the temporaries")?;
        Ok(temps)
    }

    fn sequence(&mut self, terminators: &[Tok]) -> Result<Rc<Node>, SyntaxError> {
        let lo = self.ids.peek();
        let start = self.token().start;
        let mut statements = Vec::new();
        while !terminators.contains(self.peek()) {
            statements.push(self.statement()?);
            if self.peek() == &Tok::Dot {
                while self.peek() == &Tok::Dot {
                    self.bump();
                }
            } else if !terminators.contains(self.peek()) {
                return self.error(format!("expected '.' or end of sequence, found {}", describe(self.peek())));
            }
        }
        let end = statements.last().map(|s| s.span.end).unwrap_or(start);
        let id = self.ids.alloc();
        let kind = NodeKind::Sequence { statements };
        Ok(Rc::new(Node { id, lo, span: SourceSpan::new(start, end, self.file), kind }))
    }

    fn statement(&mut self) -> Result<Rc<Node>, SyntaxError> {
        if self.peek() == &Tok::Caret {
            let lo = self.ids.peek();
            let start = self.bump().start;
            let value = self.expr()?;
            return Ok(self.node(lo, start, NodeKind::Return { value }));
        }
        self.expr()
    }

    fn expr(&mut self) -> Result<Rc<Node>, SyntaxError> {
        if let (Tok::Ident(name), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            let lo = self.ids.peek();
            let start = self.bump().start;
            self.bump();
            if matches!(self.peek(), Tok::Eof | Tok::Dot | Tok::RBracket | Tok::RParen) {
                return self.error("expected expression after ':='");
            }
            let value = self.expr()?;
            return Ok(self.node(lo, start, NodeKind::Assignment { name: Sym::new(&name), value }));
        }
        self.keyword_send()
    }

    fn keyword_send(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let receiver = self.binary_send()?;
        if !matches!(self.peek(), Tok::Keyword(_)) {
            return Ok(receiver);
        }
        let mut selector = String::new();
        let mut args = Vec::new();
        while let Tok::Keyword(part) = self.peek().clone() {
            self.bump();
            selector.push_str(&part);
            args.push(self.binary_send()?);
        }
        let (lo, start) = (receiver.lo, receiver.span.start);
        Ok(self.node(lo, start, NodeKind::MessageSend { receiver, selector: Sym::new(&selector), args }))
    }

    fn binary_send(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let mut receiver = self.unary_send()?;
        while let Tok::Binary(op) = self.peek().clone() {
            self.bump();
            let arg = self.unary_send()?;
            let (lo, start) = (receiver.lo, receiver.span.start);
            receiver = self.node(lo, start, NodeKind::MessageSend { receiver, selector: Sym::new(&op), args: vec![arg] });
        }
        Ok(receiver)
    }

    fn unary_send(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let mut receiver = self.primary()?;
        while let (Tok::Ident(name), false) = (self.peek().clone(), self.peek_at(1) == &Tok::Assign) {
            self.bump();
            let (lo, start) = (receiver.lo, receiver.span.start);
            receiver = self.node(lo, start, NodeKind::MessageSend { receiver, selector: Sym::new(&name), args: Vec::new() });
        }
        Ok(receiver)
    }

    fn primary(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let lo = self.ids.peek();
        let start = self.token().start;
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                let kind = match name.as_str() {
                    "self" => NodeKind::SelfRef { is_super: false },
                    "super" => NodeKind::SelfRef { is_super: true },
                    "true" => NodeKind::Literal(Literal::True),
                    "false" => NodeKind::Literal(Literal::False),
                    "nil" => NodeKind::Literal(Literal::Nil),
                    _ => NodeKind::VarRead { name: Sym::new(&name) },
                };
                Ok(self.node(lo, start, kind))
            }
            Tok::Int(v) => {
                self.bump();
                Ok(self.node(lo, start, NodeKind::Literal(Literal::Int(v))))
            }
            Tok::Binary(op) if op == "-" && matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(v) = self.bump().tok else { unreachable!() };
                Ok(self.node(lo, start, NodeKind::Literal(Literal::Int(-v))))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(self.node(lo, start, NodeKind::Literal(Literal::Str(Rc::from(s.as_str())))))
            }
            Tok::Symbol(s) => {
                self.bump();
                Ok(self.node(lo, start, NodeKind::Literal(Literal::Symbol(Sym::new(&s)))))
            }
            Tok::ArrayStart => {
                self.bump();
                let items = self.literal_array_items()?;
                Ok(self.node(lo, start, NodeKind::LiteralArray(items)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::LBracket => self.block(),
            other => self.error(format!("expected expression, found {}", describe(&other))),
        }
    }

    fn literal_array_items(&mut self) -> Result<Vec<Literal>, SyntaxError> {
        let mut items = Vec::new();
        loop {
            let lit = match self.peek().clone() {
                Tok::RParen => {
                    self.bump();
                    return Ok(items);
                }
                Tok::Ident(name) => match name.as_str() {
                    "true" => Literal::True,
                    "false" => Literal::False,
                    "nil" => Literal::Nil,
                    _ => Literal::Symbol(Sym::new(&name)),
                },
                Tok::Keyword(first) => {
                    // `#(value:value:)` spells one keyword selector.
                    let mut name = first;
                    while let Tok::Keyword(more) = self.peek_at(1).clone() {
                        self.bump();
                        name.push_str(&more);
                    }
                    Literal::Symbol(Sym::new(&name))
                }
                Tok::Binary(op) => Literal::Symbol(Sym::new(&op)),
                Tok::Int(v) => Literal::Int(v),
                Tok::Str(s) => Literal::Str(Rc::from(s.as_str())),
                Tok::Symbol(s) => Literal::Symbol(Sym::new(&s)),
                Tok::Eof => return self.error("unterminated literal array"),
                other => return self.error(format!("unexpected {} in literal array", describe(&other))),
            };
            self.bump();
            items.push(lit);
        }
    }

    fn block(&mut self) -> Result<Rc<Node>, SyntaxError> {
        let lo = self.ids.peek();
        let start = self.bump().start;
        let mut params = Vec::new();
        while self.peek() == &Tok::Colon {
            self.bump();
            params.push(self.ident("block parameter")?);
        }
        if !params.is_empty() {
            match self.peek() {
                Tok::Pipe => {
                    self.bump();
                }
                Tok::RBracket => {}
                // `[:x || t | ...]` lexes the two bars as a binary operator.
                Tok::Binary(op) if op == "||" => return self.error("unsupported '||' in block header"),
                _ => return self.error("expected '|' after block parameters"),
            }
        }
        let temps = self.temps()?;
        let body = self.sequence(&[Tok::RBracket])?;
        self.expect(&Tok::RBracket, "']' closing the block")?;
        Ok(self.node(lo, start, NodeKind::Block { params, temps, body }))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Keyword(s) => format!("keyword '{s}'"),
        Tok::Binary(s) => format!("operator '{s}'"),
        Tok::Int(v) => format!("integer {v}"),
        Tok::Str(_) => "string literal".into(),
        Tok::Symbol(s) => format!("symbol #{s}"),
        Tok::ArrayStart => "'#('".into(),
        Tok::Assign => "':='".into(),
        Tok::Caret => "'^'".into(),
        Tok::Dot => "'.'".into(),
        Tok::Colon => "':'".into(),
        Tok::Pipe => "'|'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{find_nodes, unparse, unparse_program, Kind, NodeQuery};

    fn method(src: &str) -> Rc<Node> {
        let program = parse(&format!("class T [ |x y| {src} ]")).unwrap();
        let NodeKind::ClassDef { methods, .. } = &program.classes[0].kind else { panic!() };
        methods[0].clone()
    }

    #[test]
    fn minimal_class() {
        let program = parse("class Point [ |x| x [ ^x ] ]").unwrap();
        assert_eq!(program.classes.len(), 1);
        let NodeKind::ClassDef { name, slots, methods, .. } = &program.classes[0].kind else { panic!() };
        assert_eq!(name.as_str(), "Point");
        assert_eq!(slots, &vec![Sym::new("x")]);
        assert_eq!(methods.len(), 1);
        let NodeKind::MethodDef { body, .. } = &methods[0].kind else { panic!() };
        let NodeKind::Sequence { statements } = &body.kind else { panic!() };
        assert_eq!(statements.len(), 1);
        let NodeKind::Return { value } = &statements[0].kind else { panic!() };
        assert!(matches!(value.kind, NodeKind::VarRead { name } if name.as_str() == "x"));
    }

    #[test]
    fn top_level_unary_chain() {
        let program = parse("Object new logCr").unwrap();
        let NodeKind::Sequence { statements } = &program.body.kind else { panic!() };
        assert_eq!(statements.len(), 1);
        let NodeKind::MessageSend { receiver, selector, .. } = &statements[0].kind else { panic!() };
        assert_eq!(selector.as_str(), "logCr");
        assert!(matches!(&receiver.kind, NodeKind::MessageSend { selector, .. } if selector.as_str() == "new"));
    }

    #[test]
    fn missing_expression_after_assignment() {
        let err = parse("x := ").unwrap_err();
        assert_eq!(err.span.start, 5);
        assert!(err.message.contains("expected expression"));
    }

    #[test]
    fn keyword_arity_matches_selector() {
        let m = method("foo [ ^self at: 1 put: (2 + 3) ]");
        for send in find_nodes(&m, &NodeQuery::AllSends) {
            let NodeKind::MessageSend { selector, args, .. } = &send.kind else { panic!() };
            assert_eq!(selector.arity(), args.len());
        }
    }

    #[test]
    fn subtree_ids_are_contiguous() {
        let m = method("foo: a [ |t| t := a + 1. ^[:z | z * t] value: 3 ]");
        m.walk(&mut |n| {
            let mut ids = Vec::new();
            n.walk(&mut |d| ids.push(d.id.0));
            ids.sort();
            assert_eq!(ids.first().copied(), Some(n.lo.0));
            assert_eq!(ids.last().copied(), Some(n.id.0));
            assert_eq!(ids.len() as u32, n.id.0 - n.lo.0 + 1);
        });
    }

    #[test]
    fn navigation_queries() {
        let m = method("foo [ self a. self b. ^self c ]");
        assert_eq!(find_nodes(&m, &NodeQuery::AllSends).len(), 3);
        let m = method("bar [ x := 1. y := 2 ]");
        assert_eq!(find_nodes(&m, &NodeQuery::WritesOf(Sym::new("x"))).len(), 1);
        let second = find_nodes(&m, &NodeQuery::StatementAt(2));
        assert_eq!(second.len(), 1);
        assert_eq!(second[0].var_name(), Some(Sym::new("y")));
        assert!(find_nodes(&m, &NodeQuery::StatementAt(3)).is_empty());
        assert!(find_nodes(&m, &NodeQuery::StatementAt(0)).is_empty());
    }

    #[test]
    fn literal_arrays_hold_symbols() {
        let program = parse("#(receiver arguments value:value: 3 'a')").unwrap();
        let NodeKind::Sequence { statements } = &program.body.kind else { panic!() };
        let NodeKind::LiteralArray(items) = &statements[0].kind else { panic!() };
        assert_eq!(items.len(), 5);
        assert_eq!(items[2], Literal::Symbol(Sym::new("value:value:")));
    }

    #[test]
    fn reparse_of_method_is_id_stable() {
        let src = "foo: a [ ^a + 1 ]";
        let mut ids = IdGen::starting_at(NodeId(40));
        let m1 = parse_method(src, 0, Sym::new("t"), &mut ids).unwrap();
        let mut ids = IdGen::starting_at(NodeId(40));
        let m2 = parse_method(src, 0, Sym::new("t"), &mut ids).unwrap();
        assert_eq!(m1.id, m2.id);
        assert_eq!(m1.lo, NodeId(40));
        assert_eq!(unparse(&m1), unparse(&m2));
    }

    #[test]
    fn round_trip_is_structural() {
        let src = "class A extends Object [ |s| m: k [ |t| t := k , 'x'. s := #(a 1). ^[:q | q foo: t bar: -2] value: self ] ]\n A new m: 'z'.";
        let p1 = parse(src).unwrap();
        let text = unparse_program(&p1);
        let p2 = parse(&text).unwrap();
        assert_eq!(unparse_program(&p2), text);
        assert_eq!(p2.classes[0].count_kind(Kind::MessageSend), p1.classes[0].count_kind(Kind::MessageSend));
    }
}
