//! Halstead effort over operator/operand-tagged token streams, with a
//! transparent line-oriented lexer.
//!
//! The lexer classifies identifiers and literals as operands and keywords,
//! punctuation and operator symbols as operators, using per-language keyword
//! tables. Lines are lexed independently (diff hunks have no surrounding
//! context); block comments are recognised only from their opening line.

use crate::entities::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Operator,
    Operand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub class: TokenClass,
    pub text: String,
}

impl Token {
    pub fn operator(text: impl Into<String>) -> Token {
        Token {
            class: TokenClass::Operator,
            text: text.into(),
        }
    }

    pub fn operand(text: impl Into<String>) -> Token {
        Token {
            class: TokenClass::Operand,
            text: text.into(),
        }
    }
}

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "int", "long", "register", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while",
];

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

fn keywords(language: Language) -> &'static [&'static str] {
    match language {
        Language::C => C_KEYWORDS,
        Language::Java => JAVA_KEYWORDS,
        Language::Python => PYTHON_KEYWORDS,
        Language::Unsupported => &[],
    }
}

const MULTI_CHAR_OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "**=", "//=", "->", "=>", "==", "!=", "<=", ">=", "&&", "||", "++",
    "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "::", "**", "//",
];

/// Lex a set of changed lines into a tagged token stream.
pub fn lex_tokens(text: &str, language: Language) -> Vec<Token> {
    let kw = keywords(language);
    let mut tokens = Vec::new();
    for line in text.lines() {
        lex_line(line, language, kw, &mut tokens);
    }
    tokens
}

fn lex_line(line: &str, language: Language, kw: &[&str], tokens: &mut Vec<Token>) {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // comments terminate the line
        if language == Language::Python && c == '#' {
            return;
        }
        if language != Language::Python && c == '/' && chars.get(i + 1) == Some(&'/') {
            return;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            // skip to the closing marker if it sits on this line
            let rest: String = chars[i + 2..].iter().collect();
            match rest.find("*/") {
                Some(pos) => {
                    i += 2 + pos + 2;
                    continue;
                }
                None => return,
            }
        }
        if c == '"' || c == '\'' {
            let mut j = i + 1;
            while j < chars.len() {
                if chars[j] == '\\' {
                    j += 2;
                    continue;
                }
                if chars[j] == c {
                    break;
                }
                j += 1;
            }
            let end = j.min(chars.len().saturating_sub(1));
            let literal: String = chars[i..=end.max(i)].iter().collect();
            tokens.push(Token::operand(literal));
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric() || chars[j] == '.' || chars[j] == '_')
            {
                j += 1;
            }
            tokens.push(Token::operand(chars[i..j].iter().collect::<String>()));
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            if kw.contains(&word.as_str()) {
                tokens.push(Token::operator(word));
            } else {
                tokens.push(Token::operand(word));
            }
            i = j;
            continue;
        }
        // punctuation: longest known multi-char operator first
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let mut matched = None;
        for op in MULTI_CHAR_OPERATORS {
            if rest.starts_with(op) {
                // Python's // is division, elsewhere it was a comment above
                matched = Some(*op);
                break;
            }
        }
        match matched {
            Some(op) => {
                tokens.push(Token::operator(op));
                i += op.len();
            }
            None => {
                tokens.push(Token::operator(c.to_string()));
                i += 1;
            }
        }
    }
}

/// Halstead effort E = V * D with V = N log2(eta), D = (eta1/2) * (N2/eta2).
/// Streams without operands or with a single-token vocabulary evaluate to 0.
pub fn halstead_effort(tokens: &[Token]) -> f64 {
    use std::collections::BTreeSet;
    let mut eta1: BTreeSet<&str> = BTreeSet::new();
    let mut eta2: BTreeSet<&str> = BTreeSet::new();
    let mut n1 = 0u64;
    let mut n2 = 0u64;
    for t in tokens {
        match t.class {
            TokenClass::Operator => {
                eta1.insert(&t.text);
                n1 += 1;
            }
            TokenClass::Operand => {
                eta2.insert(&t.text);
                n2 += 1;
            }
        }
    }
    let eta = (eta1.len() + eta2.len()) as f64;
    let n = (n1 + n2) as f64;
    if n == 0.0 || eta2.is_empty() || eta <= 1.0 {
        return 0.0;
    }
    let volume = n * eta.log2();
    let difficulty = (eta1.len() as f64 / 2.0) * (n2 as f64 / eta2.len() as f64);
    volume * difficulty
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effort_hand_example() {
        // operators {=, +} with N1 = 2; operands {a, b, 1} with N2 = 4
        let tokens = vec![
            Token::operator("="),
            Token::operator("+"),
            Token::operand("a"),
            Token::operand("b"),
            Token::operand("a"),
            Token::operand("1"),
        ];
        let e = halstead_effort(&tokens);
        // V = 6 log2(5), D = (2/2) * (4/3)
        let expected = 6.0 * 5.0f64.log2() * (4.0 / 3.0);
        assert!((e - expected).abs() < 1e-9);
        assert!((e - 18.575424759098897).abs() < 1e-9);
    }

    #[test]
    fn degenerate_streams_are_zero() {
        assert_eq!(halstead_effort(&[]), 0.0);
        assert_eq!(halstead_effort(&[Token::operand("x")]), 0.0);
        assert_eq!(
            halstead_effort(&[Token::operator("+"), Token::operator("+")]),
            0.0
        );
    }

    #[test]
    fn effort_is_permutation_invariant() {
        let a = vec![
            Token::operator("="),
            Token::operand("x"),
            Token::operand("y"),
            Token::operator("*"),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(halstead_effort(&a), halstead_effort(&b));
    }

    #[test]
    fn lexer_classifies_c_line() {
        let tokens = lex_tokens("a = b + 1; // note\n", Language::C);
        let ops: Vec<&str> = tokens
            .iter()
            .filter(|t| t.class == TokenClass::Operator)
            .map(|t| t.text.as_str())
            .collect();
        let operands: Vec<&str> = tokens
            .iter()
            .filter(|t| t.class == TokenClass::Operand)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(ops, vec!["=", "+", ";"]);
        assert_eq!(operands, vec!["a", "b", "1"]);
    }

    #[test]
    fn lexer_treats_keywords_as_operators() {
        let tokens = lex_tokens("if (x) return y;\n", Language::C);
        let kinds: Vec<(TokenClass, &str)> =
            tokens.iter().map(|t| (t.class, t.text.as_str())).collect();
        assert!(kinds.contains(&(TokenClass::Operator, "if")));
        assert!(kinds.contains(&(TokenClass::Operator, "return")));
        assert!(kinds.contains(&(TokenClass::Operand, "x")));
        assert!(kinds.contains(&(TokenClass::Operand, "y")));
    }

    #[test]
    fn lexer_handles_strings_and_multichar_operators() {
        let tokens = lex_tokens("s += \"a + b\";\n", Language::C);
        let ops: Vec<&str> = tokens
            .iter()
            .filter(|t| t.class == TokenClass::Operator)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(ops, vec!["+=", ";"]);
        let operands: Vec<&str> = tokens
            .iter()
            .filter(|t| t.class == TokenClass::Operand)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(operands, vec!["s", "\"a + b\""]);
    }

    #[test]
    fn python_comment_and_floor_division() {
        let tokens = lex_tokens("y = x // 2  # halve\n", Language::Python);
        let ops: Vec<&str> = tokens
            .iter()
            .filter(|t| t.class == TokenClass::Operator)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(ops, vec!["=", "//"]);
    }
}
