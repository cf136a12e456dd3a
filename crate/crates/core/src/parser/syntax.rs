//! Recursive-descent parser producing the unresolved block syntax tree.

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, Pos};
use crate::expr::{BinOp, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Model,
    Dynamics,
    Extend,
}

impl BlockKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BlockKind::Model => "model",
            BlockKind::Dynamics => "dynamics",
            BlockKind::Extend => "extend",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub text: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawSyntax {
    pub family: Name,
    pub args: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodySyntax {
    Equals(Expr, Expr),
    Depends(Vec<Name>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Var(Vec<Name>),
    Exo(Vec<Name>, Option<LawSyntax>),
    Param(Vec<(Name, Option<f64>)>),
    Eq { name: Name, body: BodySyntax },
    Ddt { var: Name, body: BodySyntax },
    Selfreg(Vec<Name>),
    Positive(Vec<Name>),
    Promote { from: Name, to: Option<Name> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub name: Name,
    pub base: Option<Name>,
    pub items: Vec<(Pos, Item)>,
}

/// Parsed `.cmf` document, before name resolution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelFile {
    pub blocks: Vec<Block>,
}

pub fn parse_file(src: &str) -> Result<ModelFile, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, at: 0 };
    let mut blocks = Vec::new();
    while p.peek() != &Tok::Eof {
        blocks.push(p.block()?);
    }
    Ok(ModelFile { blocks })
}

/// Parses a standalone expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, at: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            message,
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Ident(text) => {
                let pos = self.pos();
                self.bump();
                Ok(Name { text, pos })
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.unexpected(&format!("`{kw}`")),
        }
    }

    fn name_list(&mut self) -> Result<Vec<Name>, ParseError> {
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        Ok(names)
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let negative = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Number(x) => {
                self.bump();
                Ok(if negative { -x } else { x })
            }
            _ => self.unexpected("a number"),
        }
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        let kind = match self.peek() {
            Tok::Ident(s) if s == "model" => BlockKind::Model,
            Tok::Ident(s) if s == "dynamics" => BlockKind::Dynamics,
            Tok::Ident(s) if s == "extend" => BlockKind::Extend,
            _ => return self.unexpected("`model`, `dynamics` or `extend`"),
        };
        self.bump();
        let name = self.ident()?;
        let base = if kind == BlockKind::Extend {
            self.keyword("of")?;
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        loop {
            while self.eat(&Tok::Semi) {}
            if self.eat(&Tok::RBrace) {
                break;
            }
            let pos = self.pos();
            items.push((pos, self.item(kind)?));
        }
        Ok(Block {
            kind,
            name,
            base,
            items,
        })
    }

    fn item(&mut self, kind: BlockKind) -> Result<Item, ParseError> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.unexpected("a declaration"),
        };
        let allowed = match kw.as_str() {
            "var" | "exo" | "param" | "positive" => true,
            "eq" => kind != BlockKind::Dynamics,
            "ddt" | "selfreg" => kind == BlockKind::Dynamics,
            "promote" => kind == BlockKind::Extend,
            _ => return self.unexpected("a declaration (`var`, `exo`, `param`, `eq`, `ddt`, `selfreg`, `positive` or `promote`)"),
        };
        if !allowed {
            return self.error(format!(
                "`{kw}` is not allowed in a `{}` block",
                kind.keyword()
            ));
        }
        self.bump();
        match kw.as_str() {
            "var" => Ok(Item::Var(self.name_list()?)),
            "exo" => {
                let names = self.name_list()?;
                let law = if self.eat(&Tok::Tilde) {
                    let family = self.ident()?;
                    self.expect(Tok::LParen)?;
                    let mut args = vec![self.signed_number()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.signed_number()?);
                    }
                    self.expect(Tok::RParen)?;
                    Some(LawSyntax { family, args })
                } else {
                    None
                };
                Ok(Item::Exo(names, law))
            }
            "param" => {
                let mut params = Vec::new();
                loop {
                    let name = self.ident()?;
                    let value = if self.eat(&Tok::Eq) {
                        Some(self.signed_number()?)
                    } else {
                        None
                    };
                    params.push((name, value));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                Ok(Item::Param(params))
            }
            "eq" => {
                let mut name = self.ident()?;
                if *self.peek() == Tok::Plus && *self.peek_at(1) == Tok::Colon {
                    self.bump();
                    name.text.push('+');
                }
                self.expect(Tok::Colon)?;
                Ok(Item::Eq {
                    name,
                    body: self.body(false)?,
                })
            }
            "ddt" => {
                let var = self.ident()?;
                Ok(Item::Ddt {
                    var,
                    body: self.body(true)?,
                })
            }
            "selfreg" => Ok(Item::Selfreg(self.name_list()?)),
            "positive" => Ok(Item::Positive(self.name_list()?)),
            "promote" => {
                let from = self.ident()?;
                let to = if self.eat(&Tok::Arrow) {
                    Some(self.ident()?)
                } else {
                    None
                };
                Ok(Item::Promote { from, to })
            }
            _ => unreachable!("keyword checked above"),
        }
    }

    /// `depends(a, b, ...)`, or `lhs = rhs` for equations and `= rhs` for
    /// time derivatives.
    fn body(&mut self, derivative: bool) -> Result<BodySyntax, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "depends") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let names = if *self.peek() == Tok::RParen {
                Vec::new()
            } else {
                self.name_list()?
            };
            self.expect(Tok::RParen)?;
            return Ok(BodySyntax::Depends(names));
        }
        if derivative {
            self.expect(Tok::Eq)?;
            let rhs = self.expr()?;
            return Ok(BodySyntax::Equals(rhs, Expr::num(0.0)));
        }
        let lhs = self.expr()?;
        self.expect(Tok::Eq)?;
        let rhs = self.expr()?;
        Ok(BodySyntax::Equals(lhs, rhs))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(x) => {
                self.bump();
                Ok(Expr::num(x))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Expr::sym(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.unexpected("an expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("a - b - c * d ^ 2 ^ 3").unwrap();
        assert_eq!(e.to_string(), "a-b-c*d^2^3");
        let e = parse_expr("-x^2").unwrap();
        assert_eq!(e, Expr::neg(Expr::binary(BinOp::Pow, Expr::sym("x"), Expr::num(2.0))));
        let e = parse_expr("(a - b) / (c + d)").unwrap();
        assert_eq!(e.to_string(), "(a-b)/(c+d)");
    }

    #[test]
    fn dangling_operator_is_reported_at_equals() {
        let err = parse_file("model m {\n  var X\n  eq f: X + = 0\n}").unwrap_err();
        assert_eq!(err.pos, Pos { line: 3, col: 13 });
        assert!(err.message.contains("expected an expression"), "{}", err.message);
    }

    #[test]
    fn plus_suffix_on_equation_names() {
        let f = parse_file("model m { var x; eq f_x+: x - 1 = 0 }").unwrap();
        match &f.blocks[0].items[1].1 {
            Item::Eq { name, .. } => assert_eq!(name.text, "f_x+"),
            other => panic!("unexpected item {other:?}"),
        }
    }

    #[test]
    fn misplaced_declarations() {
        let err = parse_file("model m { ddt x = 1 }").unwrap_err();
        assert!(err.message.contains("not allowed"));
        let err = parse_file("dynamics d { promote a }").unwrap_err();
        assert!(err.message.contains("not allowed"));
    }

    #[test]
    fn empty_document() {
        assert_eq!(parse_file("  # nothing here\n").unwrap(), ModelFile::default());
    }
}
