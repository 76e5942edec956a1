//! Canonical-vector index algebra, the semi-tensor product on logical
//! matrices, and a small Boolean expression language.
//!
//! Boolean values are identified with canonical vectors as `0 ~ δ₂¹`,
//! `1 ~ δ₂²`. Under this codec the product x₁⋉x₂⋉…⋉xₙ of n Boolean
//! variables is δ_{2ⁿ}^i with `i = 1 + Σ bⱼ·2^(n−j)` — variable 1 is the
//! most significant bit. This direction is forced by the product rule
//! δ_p^i ⋉ δ_q^j = δ_{pq}^{(i−1)q+j} and is the opposite of the
//! convention used by much of the literature on the subject, so it is
//! worth double-checking before wiring in external data.

use std::collections::HashMap;
use std::fmt;

/// Errors from index algebra and expression evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicError {
    /// `encode_state` was called with an empty bit sequence.
    EmptyBits,
    /// A 1-based index fell outside `[1, dim]`.
    IndexOutOfRange { index: usize, dim: usize },
    /// A dimension did not match what the operation requires.
    DimMismatch { expected: usize, got: usize },
    /// An expression referenced a variable absent from the environment.
    UnboundVariable(String),
}

impl fmt::Display for LogicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicError::EmptyBits => write!(f, "empty bit sequence"),
            LogicError::IndexOutOfRange { index, dim } => {
                write!(f, "index {index} out of range for dimension {dim}")
            }
            LogicError::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            LogicError::UnboundVariable(name) => write!(f, "unbound variable `{name}`"),
        }
    }
}

impl std::error::Error for LogicError {}

/// The canonical vector δ_n^i: column i of the n×n identity matrix.
/// Indices are 1-based throughout, matching the δ notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalVector {
    dim: usize,
    index: usize,
}

impl CanonicalVector {
    pub fn new(dim: usize, index: usize) -> Result<Self, LogicError> {
        if dim == 0 || index == 0 || index > dim {
            return Err(LogicError::IndexOutOfRange { index, dim });
        }
        Ok(CanonicalVector { dim, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 1-based index i of δ_n^i.
    pub fn index(&self) -> usize {
        self.index
    }
}

impl fmt::Display for CanonicalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "δ_{}^{}", self.dim, self.index)
    }
}

/// A logical matrix: every column is a canonical vector, so an n×q matrix
/// is stored as one 1-based row index per column. This is the only matrix
/// representation used outside tests; dense forms exist solely as test
/// oracles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalMatrix {
    rows: usize,
    col_indices: Vec<usize>,
}

impl LogicalMatrix {
    pub fn new(rows: usize, col_indices: Vec<usize>) -> Result<Self, LogicError> {
        if rows == 0 {
            return Err(LogicError::IndexOutOfRange { index: 0, dim: 0 });
        }
        for &i in &col_indices {
            if i == 0 || i > rows {
                return Err(LogicError::IndexOutOfRange { index: i, dim: rows });
            }
        }
        Ok(LogicalMatrix { rows, col_indices })
    }

    pub fn identity(n: usize) -> Self {
        LogicalMatrix {
            rows: n,
            col_indices: (1..=n).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.col_indices.len()
    }

    /// Row indices, one per column, 1-based.
    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Column j (1-based) as a canonical vector.
    ///
    /// Panics if j is out of range; passing a bad column is a programming
    /// error, not an input condition.
    pub fn column(&self, j: usize) -> CanonicalVector {
        assert!(
            j >= 1 && j <= self.col_indices.len(),
            "column {} out of range for {} columns",
            j,
            self.col_indices.len()
        );
        CanonicalVector {
            dim: self.rows,
            index: self.col_indices[j - 1],
        }
    }

    /// Matrix–vector product M·δ_q^j, i.e. column selection.
    pub fn apply(&self, v: CanonicalVector) -> Result<CanonicalVector, LogicError> {
        if v.dim != self.cols() {
            return Err(LogicError::DimMismatch {
                expected: self.cols(),
                got: v.dim,
            });
        }
        Ok(self.column(v.index))
    }
}

/// Encode a Boolean assignment as a canonical vector of dimension 2^n:
/// the STP product x₁⋉…⋉xₙ under the `0 ~ δ₂¹` codec, which works out to
/// index `1 + Σ bⱼ·2^(n−j)` (bit 1 most significant).
pub fn encode_state(bits: &[bool]) -> Result<CanonicalVector, LogicError> {
    if bits.is_empty() {
        return Err(LogicError::EmptyBits);
    }
    let mut index = 0usize;
    for &b in bits {
        index = (index << 1) | b as usize;
    }
    Ok(CanonicalVector {
        dim: 1usize << bits.len(),
        index: index + 1,
    })
}

/// Inverse of [`encode_state`]: recover the n Boolean values from δ_{2^n}^i.
pub fn decode_state(v: CanonicalVector, n: usize) -> Result<Vec<bool>, LogicError> {
    if n == 0 || v.dim != 1usize << n {
        return Err(LogicError::DimMismatch {
            expected: 1usize << n,
            got: v.dim,
        });
    }
    let raw = v.index - 1;
    Ok((0..n).map(|j| (raw >> (n - 1 - j)) & 1 == 1).collect())
}

/// STP of canonical vectors: δ_p^i ⋉ δ_q^j = δ_{pq}^{(i−1)q+j}.
pub fn stp_canonical(a: CanonicalVector, b: CanonicalVector) -> CanonicalVector {
    CanonicalVector {
        dim: a.dim * b.dim,
        index: (a.index - 1) * b.dim + b.index,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Semi-tensor product of two logical matrices:
/// A ⋉ B = (A ⊗ I_{s/q})(B ⊗ I_{s/p}) with s = lcm(q, p), q = cols(A),
/// p = rows(B). The product of logical matrices is again logical, so the
/// whole computation runs on column indices; the result has
/// rows(A)·s/q rows and cols(B)·s/p columns.
pub fn stp_logical(a: &LogicalMatrix, b: &LogicalMatrix) -> LogicalMatrix {
    let q = a.cols();
    let p = b.rows();
    let s = q / gcd(q, p) * p;
    let l = s / q; // lift factor for A
    let k = s / p; // lift factor for B
    let out_rows = a.rows() * l;
    let mut out = Vec::with_capacity(b.cols() * k);
    for &bj in b.col_indices() {
        // Column (j−1)k+t of B ⊗ I_k is δ_s^{(bj−1)k+t}.
        for t in 1..=k {
            let idx = (bj - 1) * k + t; // column of A ⊗ I_l to select
            let c = (idx - 1) / l; // 0-based column of A
            let d = (idx - 1) % l; // 0-based offset within the lift block
            out.push((a.col_indices[c] - 1) * l + d + 1);
        }
    }
    LogicalMatrix {
        rows: out_rows,
        col_indices: out,
    }
}

/// Boolean expression over named variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Var(String),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    /// All variable names referenced, in sorted order without duplicates.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(name) => out.push(name),
            BoolExpr::Not(e) => e.collect_vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Precedence level for printing: higher binds tighter.
    fn prec(&self) -> u8 {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => 4,
            BoolExpr::Not(_) => 3,
            BoolExpr::And(..) => 2,
            BoolExpr::Xor(..) => 1,
            BoolExpr::Or(..) => 0,
        }
    }
}

/// Prints in the same grammar `parse_expr` accepts, with the minimum
/// parentheses needed to reparse to a structurally equal tree. Binary
/// operators are left-associative, so a right child at the same
/// precedence level is parenthesized.
impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &BoolExpr, min: u8) -> fmt::Result {
            if e.prec() < min {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            BoolExpr::Const(b) => write!(f, "{}", *b as u8),
            BoolExpr::Var(name) => write!(f, "{name}"),
            BoolExpr::Not(e) => {
                write!(f, "!")?;
                child(f, e, 3)
            }
            BoolExpr::And(a, b) => {
                child(f, a, 2)?;
                write!(f, " & ")?;
                child(f, b, 3)
            }
            BoolExpr::Xor(a, b) => {
                child(f, a, 1)?;
                write!(f, " ^ ")?;
                child(f, b, 2)
            }
            BoolExpr::Or(a, b) => {
                child(f, a, 0)?;
                write!(f, " | ")?;
                child(f, b, 1)
            }
        }
    }
}

/// Syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Const(bool),
    Bang,
    Amp,
    Caret,
    Pipe,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '!' => {
                out.push((i, Token::Bang));
                i += 1;
            }
            '&' => {
                out.push((i, Token::Amp));
                i += 1;
            }
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '|' => {
                out.push((i, Token::Pipe));
                i += 1;
            }
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            '0' => {
                out.push((i, Token::Const(false)));
                i += 1;
            }
            '1' => {
                out.push((i, Token::Const(true)));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                i += 1;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '+' || c == '-' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
            }
            other => {
                return Err(ParseError {
                    pos: i,
                    msg: format!("unknown token `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    // Grammar, loosest first:  or := xor ('|' xor)*
    //                          xor := and ('^' and)*
    //                          and := unary ('&' unary)*
    //                          unary := '!' unary | atom
    //                          atom := '0' | '1' | ident | '(' or ')'
    fn or(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.xor()?;
        while self.peek() == Some(&Token::Pipe) {
            self.bump();
            let rhs = self.xor()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn xor(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::Caret) {
            self.bump();
            let rhs = self.and()?;
            lhs = BoolExpr::Xor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::Amp) {
            self.bump();
            let rhs = self.unary()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<BoolExpr, ParseError> {
        if self.peek() == Some(&Token::Bang) {
            self.bump();
            return Ok(BoolExpr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<BoolExpr, ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(Token::Const(b)) => Ok(BoolExpr::Const(b)),
            Some(Token::Ident(name)) => Ok(BoolExpr::Var(name)),
            Some(Token::LParen) => {
                let inner = self.or()?;
                let pos = self.here();
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(ParseError {
                        pos,
                        msg: "expected `)`".to_string(),
                    }),
                }
            }
            Some(tok) => Err(ParseError {
                pos,
                msg: format!("expected an operand, found {tok:?}"),
            }),
            None => Err(ParseError {
                pos,
                msg: "unexpected end of input".to_string(),
            }),
        }
    }
}

/// Parse an expression. Identifiers match `[A-Za-z_][A-Za-z0-9_+\-]*`
/// (so names like `Ara+` and `Ara-` are legal verbatim), constants are
/// `0`/`1`, and precedence is `!` > `&` > `^` > `|` with all binary
/// operators left-associative.
pub fn parse_expr(text: &str) -> Result<BoolExpr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = p.or()?;
    if p.pos < p.tokens.len() {
        return Err(ParseError {
            pos: p.here(),
            msg: "trailing input after expression".to_string(),
        });
    }
    Ok(expr)
}

/// Evaluate under an environment binding variable names to Booleans.
pub fn eval_expr(e: &BoolExpr, env: &HashMap<String, bool>) -> Result<bool, LogicError> {
    match e {
        BoolExpr::Const(b) => Ok(*b),
        BoolExpr::Var(name) => env
            .get(name)
            .copied()
            .ok_or_else(|| LogicError::UnboundVariable(name.clone())),
        BoolExpr::Not(inner) => Ok(!eval_expr(inner, env)?),
        BoolExpr::And(a, b) => Ok(eval_expr(a, env)? & eval_expr(b, env)?),
        BoolExpr::Or(a, b) => Ok(eval_expr(a, env)? | eval_expr(b, env)?),
        BoolExpr::Xor(a, b) => Ok(eval_expr(a, env)? ^ eval_expr(b, env)?),
    }
}

/// The structure matrix M_f ∈ L_{2×2^k} of an expression over an ordered
/// variable list: column `encode_state(bits).index` holds δ₂^{1+f(bits)},
/// so f(x₁,…,x_k) = M_f·(x₁⋉…⋉x_k) under the `0 ~ δ₂¹` codec.
pub fn structure_matrix(e: &BoolExpr, ordered_vars: &[&str]) -> Result<LogicalMatrix, LogicError> {
    let k = ordered_vars.len();
    let mut env: HashMap<String, bool> =
        ordered_vars.iter().map(|v| (v.to_string(), false)).collect();
    let mut cols = Vec::with_capacity(1usize << k);
    for raw in 0..1usize << k {
        for (j, var) in ordered_vars.iter().enumerate() {
            *env.get_mut(*var).unwrap() = (raw >> (k - 1 - j)) & 1 == 1;
        }
        cols.push(1 + eval_expr(e, &env)? as usize);
    }
    LogicalMatrix::new(2, cols)
}
