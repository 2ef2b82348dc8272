//! Concrete syntax:
//!
//! ```text
//! % comment to end of line
//! head(X) :- pos(X, c), other, not neg(X).
//! fact(a).
//! ```
//!
//! Names starting with an uppercase letter or `_` are variables; everything
//! else (lowercase identifiers, digits) is a constant or predicate symbol.
//! `not` is a keyword only when followed by whitespace.

use super::syntax::{Atom, Program, Rule, Term};
use super::LogicError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Not,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(source: &str) -> Result<Vec<Token>, LogicError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    let err = |line, column, message: String| LogicError::Syntax {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let mut push = |tok: Tok| {
            tokens.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            ',' => push(Tok::Comma),
            '.' => push(Tok::Dot),
            ':' => {
                if chars.get(i + 1) == Some(&'-') {
                    push(Tok::If);
                    i += 2;
                    column += 2;
                    continue;
                }
                return Err(err(line, column, "expected `:-`".into()));
            }
            c if is_name_char(c) => {
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                column += i - start;
                let keyword = name == "not" && chars.get(i).is_some_and(|c| c.is_whitespace());
                push(if keyword { Tok::Not } else { Tok::Name(name) });
                continue;
            }
            other => return Err(err(line, column, format!("unexpected character `{other}`"))),
        }
        i += 1;
        column += 1;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, token: &Token, message: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Syntax {
            line: token.line,
            column: token.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), LogicError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            self.error(&t, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn atom(&mut self) -> Result<Atom, LogicError> {
        let t = self.next();
        let name = match &t.tok {
            Tok::Name(n) => n.clone(),
            other => return self.error(&t, format!("expected atom, found {}", describe(other))),
        };
        if matches!(Term::from_name(&name), Term::Var(_)) || name.starts_with(|c: char| c.is_ascii_digit()) {
            return self.error(&t, format!("predicate name `{name}` must start with a lowercase letter"));
        }
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                let t = self.next();
                match &t.tok {
                    Tok::Name(n) => args.push(Term::from_name(n)),
                    other => return self.error(&t, format!("expected term, found {}", describe(other))),
                }
                let t = self.next();
                match t.tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    ref other => return self.error(&t, format!("expected `,` or `)`, found {}", describe(other))),
                }
            }
        }
        Ok(Atom::new(&name, args))
    }

    fn rule(&mut self) -> Result<Rule, LogicError> {
        let head = self.atom()?;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        if self.peek().tok == Tok::If {
            self.next();
            loop {
                if self.peek().tok == Tok::Not {
                    self.next();
                    neg.push(self.atom()?);
                } else {
                    pos.push(self.atom()?);
                }
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "`.` at end of rule")?;
        Ok(Rule::new(head, pos, neg))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Name(n) => format!("`{n}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::If => "`:-`".into(),
        Tok::Not => "`not`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses and validates a rule file.
pub fn parse_program(source: &str) -> Result<Program, LogicError> {
    let mut parser = Parser {
        tokens: lex(source)?,
        pos: 0,
    };
    let mut rules = Vec::new();
    while parser.peek().tok != Tok::Eof {
        rules.push(parser.rule()?);
    }
    Program::new(rules)
}

/// Parses a single atom such as `samecolor(k_red,d_red)`; no trailing dot.
pub fn parse_atom(source: &str) -> Result<Atom, LogicError> {
    let mut parser = Parser {
        tokens: lex(source)?,
        pos: 0,
    };
    let atom = parser.atom()?;
    let t = parser.next();
    if t.tok != Tok::Eof {
        return parser.error(&t, format!("unexpected {} after atom", describe(&t.tok)));
    }
    Ok(atom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doorkey_pickup_rule() {
        let p = parse_program("pickup(X) :- key(X), samecolor(X,Y), door(Y), notcarrying.").unwrap();
        assert_eq!(p.rules().len(), 1);
        let r = &p.rules()[0];
        assert_eq!(r.pos_body.len(), 4);
        assert!(r.neg_body.is_empty());
        assert_eq!(&*r.pos_body[3].predicate, "notcarrying");
    }

    #[test]
    fn office_coffee_rule_has_two_negations() {
        let p = parse_program("goto(X) :- coffee(X), not hasCoffee, not hittingDecoration.").unwrap();
        let r = &p.rules()[0];
        assert_eq!(r.pos_body.len(), 1);
        assert_eq!(r.neg_body.len(), 2);
        assert_eq!(&*r.neg_body[0].predicate, "hasCoffee");
    }

    #[test]
    fn unbound_head_variable_is_unsafe() {
        match parse_program("goto(X) :- key(Y).") {
            Err(LogicError::UnsafeRule { variable, .. }) => assert_eq!(variable, "X"),
            other => panic!("expected unsafe-rule error, got {other:?}"),
        }
    }

    #[test]
    fn unbound_negated_variable_is_unsafe() {
        assert!(matches!(
            parse_program("a(X) :- b(X), not c(Y)."),
            Err(LogicError::UnsafeRule { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_program("a :- b.\nc :- d e.") {
            Err(LogicError::Syntax { line, column, .. }) => {
                assert_eq!((line, column), (2, 8));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn missing_dot() {
        assert!(matches!(parse_program("a :- b"), Err(LogicError::Syntax { .. })));
    }

    #[test]
    fn comments_and_whitespace() {
        let p = parse_program("% policy\n\n  a :-\n   b ,  % inline\n not   c .\n").unwrap();
        assert_eq!(p.to_string(), "a :- b, not c.\n");
    }

    #[test]
    fn not_prefix_of_identifier_is_not_keyword() {
        let p = parse_program("a :- notcarrying, nothing.").unwrap();
        assert_eq!(p.rules()[0].pos_body.len(), 2);
    }

    #[test]
    fn arity_mismatch_detected() {
        assert!(matches!(
            parse_program("a(X) :- b(X).\nc :- a(x, y)."),
            Err(LogicError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn negative_cycle_is_named() {
        match parse_program("p :- q, not r.\nr :- p.") {
            Err(LogicError::NotStratified { cycle }) => {
                assert_eq!(cycle.first(), cycle.last());
                assert!(cycle.iter().any(|c| c == "not r"));
            }
            other => panic!("expected stratification error, got {other:?}"),
        }
    }

    #[test]
    fn self_negation_rejected() {
        assert!(matches!(parse_program("p :- q, not p."), Err(LogicError::NotStratified { .. })));
    }

    #[test]
    fn printed_form_reparses() {
        let src = "open(X) :- key(Z), samecolor(X,Z), door(X), locked(X), carrying(Z).\ngoto(a) :- visited(none).\nstart.\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.to_string(), src);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn atom_parser() {
        let a = parse_atom("samecolor(k_red,d_red)").unwrap();
        assert_eq!(a, Atom::ground("samecolor", &["k_red", "d_red"]));
        assert!(parse_atom("left.").is_err());
        assert!(parse_atom("X").is_err());
    }
}
