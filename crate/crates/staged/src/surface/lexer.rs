use std::fmt;

use super::Diagnostic;
use crate::kernel_syntax::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Effect,
    Do,
    In,
    Handle,
    With,
    Return,
    Continue,
    Perform,
    Fun,
    Lambda,
    Arrow,
    FatArrow,
    LeftArrow,
    Minus,
    Plus,
    Star,
    Eq,
    Bang,
    At,
    Caret,
    Colon,
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    OpenQuote,
    CloseQuote,
    Dollar,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(x) => return write!(f, "identifier `{x}`"),
            Tok::Int(n) => return write!(f, "number {n}"),
            Tok::Effect => "`effect`",
            Tok::Do => "`do`",
            Tok::In => "`in`",
            Tok::Handle => "`handle`",
            Tok::With => "`with`",
            Tok::Return => "`return`",
            Tok::Continue => "`continue`",
            Tok::Perform => "`perform`",
            Tok::Fun => "`fun`",
            Tok::Lambda => "`λ`",
            Tok::Arrow => "`->`",
            Tok::FatArrow => "`=>`",
            Tok::LeftArrow => "`<-`",
            Tok::Minus => "`-`",
            Tok::Plus => "`+`",
            Tok::Star => "`*`",
            Tok::Eq => "`=`",
            Tok::Bang => "`!`",
            Tok::At => "`@`",
            Tok::Caret => "`^`",
            Tok::Colon => "`:`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Dot => "`.`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::OpenQuote => "`<<`",
            Tok::CloseQuote => "`>>`",
            Tok::Dollar => "`$`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() && c != 'λ' && c != 'κ' || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    (c.is_alphanumeric() && c != 'λ') || c == '_' || c == '\''
}

/// Splits `text` into tokens. `(* ... *)` comments nest.
pub(crate) fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let peek = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '(' && peek == Some('*') {
            let mut depth = 0usize;
            loop {
                if i >= chars.len() {
                    return Err(Diagnostic::error("unterminated comment", span));
                }
                if chars[i] == '(' && chars.get(i + 1) == Some(&'*') {
                    depth += 1;
                    advance(&mut i, &mut line, &mut col, 2);
                } else if chars[i] == '*' && chars.get(i + 1) == Some(&')') {
                    depth -= 1;
                    advance(&mut i, &mut line, &mut col, 2);
                    if depth == 0 {
                        break;
                    }
                } else {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse().map_err(|_| Diagnostic::error(format!("number {digits} is too large"), span))?;
            out.push(Token { tok: Tok::Int(n), span });
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "effect" => Tok::Effect,
                "do" => Tok::Do,
                "in" => Tok::In,
                "handle" => Tok::Handle,
                "with" => Tok::With,
                "return" => Tok::Return,
                "continue" => Tok::Continue,
                "perform" => Tok::Perform,
                "fun" => Tok::Fun,
                _ => Tok::Ident(word),
            };
            out.push(Token { tok, span });
            continue;
        }
        let two = |a: char, b: char| c == a && peek == Some(b);
        let (tok, len) = if two('-', '>') {
            (Tok::Arrow, 2)
        } else if two('=', '>') {
            (Tok::FatArrow, 2)
        } else if two('<', '-') {
            (Tok::LeftArrow, 2)
        } else if two('<', '<') {
            (Tok::OpenQuote, 2)
        } else if two('>', '>') {
            (Tok::CloseQuote, 2)
        } else {
            let tok = match c {
                '←' => Tok::LeftArrow,
                '→' => Tok::Arrow,
                '⟨' if peek == Some('⟨') => {
                    advance(&mut i, &mut line, &mut col, 2);
                    out.push(Token { tok: Tok::OpenQuote, span });
                    continue;
                }
                '⟩' if peek == Some('⟩') => {
                    advance(&mut i, &mut line, &mut col, 2);
                    out.push(Token { tok: Tok::CloseQuote, span });
                    continue;
                }
                'λ' | '\\' => Tok::Lambda,
                '-' => Tok::Minus,
                '+' => Tok::Plus,
                '*' | '×' => Tok::Star,
                '=' => Tok::Eq,
                '!' => Tok::Bang,
                '@' => Tok::At,
                '^' => Tok::Caret,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '$' => Tok::Dollar,
                other => return Err(Diagnostic::error(format!("unexpected character `{other}`"), span)),
            };
            (tok, 1)
        };
        advance(&mut i, &mut line, &mut col, len);
        out.push(Token { tok, span });
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_and_quotes() {
        assert_eq!(
            toks("<<x>> -> <- => -{a}->"),
            vec![
                Tok::OpenQuote,
                Tok::Ident("x".into()),
                Tok::CloseQuote,
                Tok::Arrow,
                Tok::LeftArrow,
                Tok::FatArrow,
                Tok::Minus,
                Tok::LBrace,
                Tok::Ident("a".into()),
                Tok::RBrace,
                Tok::Arrow,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn nested_comments_are_skipped() {
        assert_eq!(toks("(* a (* b *) c *) 3"), vec![Tok::Int(3), Tok::Eof]);
    }

    #[test]
    fn positions_are_one_based() {
        let t = lex("\n  do").unwrap();
        assert_eq!((t[0].span.line, t[0].span.column), (2, 3));
    }

    #[test]
    fn unterminated_comment_is_reported() {
        assert!(lex("(* oops").unwrap_err().message.contains("unterminated"));
    }
}
