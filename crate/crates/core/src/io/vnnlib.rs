//! Property parser for a VNN-LIB subset: `declare-const` of `X_i`/`Y_j`,
//! `assert` over `<=`/`>=` of linear terms, with `and`/`or` nesting.
//!
//! Input constraints must form a box (one variable per inequality); output
//! assertions may nest arbitrarily and are conjoined across asserts. The
//! negated output condition is computed by De Morgan into DNF.

use super::{Conjunction, Dnf, IoError, LinearIneq, Property};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum SExpr {
    Atom(String, usize, usize),
    List(Vec<SExpr>, usize, usize),
}

impl SExpr {
    fn pos(&self) -> (usize, usize) {
        match self {
            SExpr::Atom(_, l, c) | SExpr::List(_, l, c) => (*l, *c),
        }
    }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> IoError {
    IoError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(String, usize, usize)>, IoError> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let (mut line, mut col) = (1usize, 1usize);
    let (mut tok_line, mut tok_col) = (1usize, 1usize);
    let mut in_comment = false;
    for ch in text.chars() {
        if in_comment {
            if ch == '\n' {
                in_comment = false;
            }
        } else {
            match ch {
                ';' => {
                    if !cur.is_empty() {
                        tokens.push((std::mem::take(&mut cur), tok_line, tok_col));
                    }
                    in_comment = true;
                }
                '(' | ')' => {
                    if !cur.is_empty() {
                        tokens.push((std::mem::take(&mut cur), tok_line, tok_col));
                    }
                    tokens.push((ch.to_string(), line, col));
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        tokens.push((std::mem::take(&mut cur), tok_line, tok_col));
                    }
                }
                c => {
                    if cur.is_empty() {
                        tok_line = line;
                        tok_col = col;
                    }
                    cur.push(c);
                }
            }
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    if !cur.is_empty() {
        tokens.push((cur, tok_line, tok_col));
    }
    Ok(tokens)
}

fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, IoError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<(Vec<SExpr>, usize, usize)> = Vec::new();
    let mut top: Vec<SExpr> = Vec::new();
    for (tok, line, col) in tokens {
        match tok.as_str() {
            "(" => stack.push((Vec::new(), line, col)),
            ")" => {
                let (items, l, c) = stack
                    .pop()
                    .ok_or_else(|| syntax(line, col, "unmatched `)`"))?;
                let expr = SExpr::List(items, l, c);
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(expr),
                    None => top.push(expr),
                }
            }
            _ => {
                let expr = SExpr::Atom(tok, line, col);
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(expr),
                    None => top.push(expr),
                }
            }
        }
    }
    if let Some((_, l, c)) = stack.last() {
        return Err(syntax(*l, *c, "unclosed `(`"));
    }
    Ok(top)
}

/// Linear expression over declared inputs and outputs.
#[derive(Debug, Clone)]
struct LinExpr {
    x: BTreeMap<usize, f64>,
    y: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinExpr {
    fn constant(v: f64) -> Self {
        LinExpr {
            x: BTreeMap::new(),
            y: BTreeMap::new(),
            constant: v,
        }
    }

    fn add(mut self, other: &LinExpr, scale: f64) -> Self {
        for (&i, &c) in &other.x {
            *self.x.entry(i).or_insert(0.0) += scale * c;
        }
        for (&j, &c) in &other.y {
            *self.y.entry(j).or_insert(0.0) += scale * c;
        }
        self.constant += scale * other.constant;
        self
    }

    fn as_constant(&self) -> Option<f64> {
        (self.x.iter().all(|(_, c)| *c == 0.0) && self.y.iter().all(|(_, c)| *c == 0.0))
            .then_some(self.constant)
    }

    fn mentions_x(&self) -> bool {
        self.x.values().any(|c| *c != 0.0)
    }

    fn mentions_y(&self) -> bool {
        self.y.values().any(|c| *c != 0.0)
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    if let Ok(v) = tok.parse::<f64>() {
        return Some(v);
    }
    // Rational literal p/q.
    let (p, q) = tok.split_once('/')?;
    let p: f64 = p.parse().ok()?;
    let q: f64 = q.parse().ok()?;
    (q != 0.0).then(|| p / q)
}

struct Declarations {
    inputs: usize,
    outputs: usize,
}

fn parse_var(tok: &str, decls: &Declarations) -> Option<(char, usize)> {
    let rest = tok.strip_prefix("X_").map(|r| ('x', r)).or_else(|| tok.strip_prefix("Y_").map(|r| ('y', r)))?;
    let idx: usize = rest.1.parse().ok()?;
    let within = match rest.0 {
        'x' => idx < decls.inputs,
        _ => idx < decls.outputs,
    };
    within.then_some((rest.0, idx))
}

fn eval_linear(expr: &SExpr, decls: &Declarations) -> Result<LinExpr, IoError> {
    match expr {
        SExpr::Atom(tok, line, col) => {
            if let Some(v) = parse_number(tok) {
                return Ok(LinExpr::constant(v));
            }
            if let Some((kind, idx)) = parse_var(tok, decls) {
                let mut e = LinExpr::constant(0.0);
                match kind {
                    'x' => {
                        e.x.insert(idx, 1.0);
                    }
                    _ => {
                        e.y.insert(idx, 1.0);
                    }
                }
                return Ok(e);
            }
            if tok.starts_with("X_") || tok.starts_with("Y_") {
                return Err(IoError::UnknownSymbol(format!("{tok} (not declared)")));
            }
            Err(syntax(*line, *col, format!("unknown symbol `{tok}` in term")))
        }
        SExpr::List(items, line, col) => {
            let (op, args) = match items.split_first() {
                Some((SExpr::Atom(op, _, _), args)) => (op.as_str(), args),
                _ => return Err(syntax(*line, *col, "empty or non-atomic operator")),
            };
            match op {
                "+" => {
                    let mut acc = LinExpr::constant(0.0);
                    for a in args {
                        acc = acc.add(&eval_linear(a, decls)?, 1.0);
                    }
                    Ok(acc)
                }
                "-" => match args {
                    [] => Err(syntax(*line, *col, "`-` needs at least one argument")),
                    [single] => Ok(LinExpr::constant(0.0).add(&eval_linear(single, decls)?, -1.0)),
                    [first, rest @ ..] => {
                        let mut acc = eval_linear(first, decls)?;
                        for a in rest {
                            acc = acc.add(&eval_linear(a, decls)?, -1.0);
                        }
                        Ok(acc)
                    }
                },
                "*" => {
                    let mut consts = 1.0;
                    let mut linear: Option<LinExpr> = None;
                    for a in args {
                        let e = eval_linear(a, decls)?;
                        match e.as_constant() {
                            Some(v) => consts *= v,
                            None if linear.is_none() => linear = Some(e),
                            None => {
                                return Err(IoError::Unsupported(
                                    "nonlinear term: product of two variables".into(),
                                ))
                            }
                        }
                    }
                    Ok(match linear {
                        Some(e) => LinExpr::constant(0.0).add(&e, consts),
                        None => LinExpr::constant(consts),
                    })
                }
                "/" => match args {
                    [num, den] => {
                        let n = eval_linear(num, decls)?;
                        let d = eval_linear(den, decls)?
                            .as_constant()
                            .ok_or_else(|| IoError::Unsupported("division by a variable".into()))?;
                        if d == 0.0 {
                            return Err(syntax(*line, *col, "division by zero"));
                        }
                        Ok(LinExpr::constant(0.0).add(&n, 1.0 / d))
                    }
                    _ => Err(syntax(*line, *col, "`/` takes two arguments")),
                },
                other => Err(syntax(*line, *col, format!("unsupported operator `{other}` in term"))),
            }
        }
    }
}

/// Boolean condition tree before DNF conversion. Atoms are normalized to
/// `expr <= 0` over the full (x, y) space.
#[derive(Debug, Clone)]
enum Cond {
    Atom(LinExpr, bool), // expr <= 0 (strict when bool is true)
    And(Vec<Cond>),
    Or(Vec<Cond>),
}

fn parse_cond(expr: &SExpr, decls: &Declarations) -> Result<Cond, IoError> {
    let SExpr::List(items, line, col) = expr else {
        let (l, c) = expr.pos();
        return Err(syntax(l, c, "expected a condition list"));
    };
    let (op, args) = match items.split_first() {
        Some((SExpr::Atom(op, _, _), args)) => (op.as_str(), args),
        _ => return Err(syntax(*line, *col, "empty condition")),
    };
    match op {
        "and" => Ok(Cond::And(
            args.iter().map(|a| parse_cond(a, decls)).collect::<Result<_, _>>()?,
        )),
        "or" => Ok(Cond::Or(
            args.iter().map(|a| parse_cond(a, decls)).collect::<Result<_, _>>()?,
        )),
        "<=" | ">=" => {
            let [a, b] = args else {
                return Err(syntax(*line, *col, format!("`{op}` takes two arguments")));
            };
            let ea = eval_linear(a, decls)?;
            let eb = eval_linear(b, decls)?;
            // <=: a - b <= 0;  >=: b - a <= 0.
            let diff = if op == "<=" {
                ea.add(&eb, -1.0)
            } else {
                eb.add(&ea, -1.0)
            };
            Ok(Cond::Atom(diff, false))
        }
        other => Err(syntax(*line, *col, format!("unsupported operator `{other}`"))),
    }
}

impl Cond {
    fn mentions(&self) -> (bool, bool) {
        match self {
            Cond::Atom(e, _) => (e.mentions_x(), e.mentions_y()),
            Cond::And(cs) | Cond::Or(cs) => cs.iter().fold((false, false), |(x, y), c| {
                let (cx, cy) = c.mentions();
                (x || cx, y || cy)
            }),
        }
    }

    fn negated(&self) -> Cond {
        match self {
            Cond::Atom(e, strict) => Cond::Atom(
                LinExpr::constant(0.0).add(e, -1.0),
                !strict,
            ),
            Cond::And(cs) => Cond::Or(cs.iter().map(Cond::negated).collect()),
            Cond::Or(cs) => Cond::And(cs.iter().map(Cond::negated).collect()),
        }
    }

    /// DNF expansion. Output atoms only (inputs rejected by the caller).
    fn to_dnf(&self, outputs: usize) -> Result<Dnf, IoError> {
        match self {
            Cond::Atom(e, strict) => {
                let mut coeffs = vec![0.0; outputs];
                for (&j, &c) in &e.y {
                    coeffs[j] = c;
                }
                Ok(Dnf(vec![vec![LinearIneq {
                    coeffs,
                    rhs: -e.constant,
                    strict: *strict,
                }]]))
            }
            Cond::Or(cs) => {
                let mut disjuncts = Vec::new();
                for c in cs {
                    disjuncts.extend(c.to_dnf(outputs)?.0);
                }
                Ok(Dnf(disjuncts))
            }
            Cond::And(cs) => {
                let mut acc: Vec<Conjunction> = vec![Vec::new()];
                for c in cs {
                    let d = c.to_dnf(outputs)?;
                    let mut next = Vec::with_capacity(acc.len() * d.0.len());
                    for base in &acc {
                        for extra in &d.0 {
                            let mut conj = base.clone();
                            conj.extend(extra.iter().cloned());
                            next.push(conj);
                        }
                    }
                    acc = next;
                }
                Ok(Dnf(acc))
            }
        }
    }
}

/// Folds one input atom `expr <= 0` (single X variable) into the box.
fn fold_input_atom(e: &LinExpr, box_: &mut [(f64, f64)]) -> Result<(), IoError> {
    let nonzero: Vec<(usize, f64)> = e.x.iter().filter(|(_, c)| **c != 0.0).map(|(&i, &c)| (i, c)).collect();
    let [(idx, coeff)] = nonzero.as_slice() else {
        return Err(IoError::Unsupported(
            "non-box input constraint (multiple inputs in one inequality)".into(),
        ));
    };
    // coeff * X + constant <= 0
    let bound = -e.constant / coeff;
    let (lo, hi) = &mut box_[*idx];
    if *coeff > 0.0 {
        *hi = hi.min(bound);
    } else {
        *lo = lo.max(bound);
    }
    Ok(())
}

/// Parses one property file: box constraints on inputs, an output condition,
/// and the condition's De Morgan negation in DNF.
pub fn parse_property(text: &str) -> Result<Property, IoError> {
    let forms = parse_sexprs(text)?;
    let mut decls = Declarations {
        inputs: 0,
        outputs: 0,
    };

    // First pass: declarations.
    for form in &forms {
        let SExpr::List(items, line, col) = form else {
            let (l, c) = form.pos();
            return Err(syntax(l, c, "expected a top-level list"));
        };
        if let Some(SExpr::Atom(head, _, _)) = items.first() {
            if head == "declare-const" {
                let Some(SExpr::Atom(name, l, c)) = items.get(1) else {
                    return Err(syntax(*line, *col, "declare-const needs a name"));
                };
                if let Some(rest) = name.strip_prefix("X_") {
                    let idx: usize = rest
                        .parse()
                        .map_err(|_| syntax(*l, *c, format!("bad input index in `{name}`")))?;
                    decls.inputs = decls.inputs.max(idx + 1);
                } else if let Some(rest) = name.strip_prefix("Y_") {
                    let idx: usize = rest
                        .parse()
                        .map_err(|_| syntax(*l, *c, format!("bad output index in `{name}`")))?;
                    decls.outputs = decls.outputs.max(idx + 1);
                } else {
                    return Err(IoError::UnknownSymbol(name.clone()));
                }
            }
        }
    }

    let mut box_ = vec![(f64::NEG_INFINITY, f64::INFINITY); decls.inputs];
    let mut output_conds: Vec<Cond> = Vec::new();

    // Second pass: asserts. Top-level `and`s are flattened so asserts may mix
    // input and output conjuncts at the outermost level only.
    for form in &forms {
        let SExpr::List(items, line, col) = form else {
            continue;
        };
        let Some(SExpr::Atom(head, _, _)) = items.first() else {
            return Err(syntax(*line, *col, "empty top-level form"));
        };
        match head.as_str() {
            "declare-const" => {}
            "assert" => {
                let [_, body] = items.as_slice() else {
                    return Err(syntax(*line, *col, "assert takes one condition"));
                };
                let cond = parse_cond(body, &decls)?;
                let mut queue = vec![cond];
                while let Some(c) = queue.pop() {
                    match c {
                        Cond::And(parts) => queue.extend(parts),
                        c => {
                            let (mx, my) = c.mentions();
                            match (mx, my) {
                                (true, true) => {
                                    return Err(IoError::Unsupported(
                                        "constraint mixes inputs and outputs".into(),
                                    ))
                                }
                                (true, false) => match c {
                                    Cond::Atom(e, _) => fold_input_atom(&e, &mut box_)?,
                                    _ => {
                                        return Err(IoError::Unsupported(
                                            "non-box input constraint (disjunction over inputs)"
                                                .into(),
                                        ))
                                    }
                                },
                                (false, _) => output_conds.push(c),
                            }
                        }
                    }
                }
            }
            other => return Err(syntax(*line, *col, format!("unsupported form `{other}`"))),
        }
    }

    if output_conds.is_empty() {
        return Err(IoError::NoOutputAssert);
    }
    for (i, (lo, hi)) in box_.iter().enumerate() {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IoError::UnboundedInput(i));
        }
        if lo > hi {
            return Err(IoError::EmptyInputInterval(i, *lo, *hi));
        }
    }

    let condition = if output_conds.len() == 1 {
        output_conds.pop().expect("nonempty")
    } else {
        Cond::And(output_conds)
    };
    let output_condition = condition.to_dnf(decls.outputs)?;
    let negated_output = condition.negated().to_dnf(decls.outputs)?;

    Ok(Property {
        input_box: box_,
        output_condition,
        negated_output,
    })
}

fn fmt_num(v: f64) -> String {
    // Rust's shortest round-trip Display keeps emit/parse lossless.
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn emit_atom(atom: &LinearIneq) -> String {
    debug_assert!(!atom.strict, "source grammar has no strict operators");
    let terms: Vec<String> = atom
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, &c)| {
            if c == 1.0 {
                format!("Y_{j}")
            } else {
                format!("(* {} Y_{j})", fmt_num(c))
            }
        })
        .collect();
    let lhs = match terms.len() {
        0 => "0.0".to_string(),
        1 => terms.into_iter().next().expect("one term"),
        _ => format!("(+ {})", terms.join(" ")),
    };
    format!("(<= {lhs} {})", fmt_num(atom.rhs))
}

/// Emits a property back to the VNN-LIB subset. Inverse of
/// [`parse_property`] up to whitespace: the reparsed property is
/// structurally equal.
pub fn emit_property(prop: &Property) -> String {
    let mut out = String::new();
    for i in 0..prop.input_box.len() {
        out.push_str(&format!("(declare-const X_{i} Real)\n"));
    }
    let outputs = prop
        .output_condition
        .0
        .iter()
        .flatten()
        .map(|a| a.coeffs.len())
        .max()
        .unwrap_or(0);
    for j in 0..outputs {
        out.push_str(&format!("(declare-const Y_{j} Real)\n"));
    }
    for (i, (lo, hi)) in prop.input_box.iter().enumerate() {
        out.push_str(&format!("(assert (>= X_{i} {}))\n", fmt_num(*lo)));
        out.push_str(&format!("(assert (<= X_{i} {}))\n", fmt_num(*hi)));
    }
    let conj_text = |conj: &[LinearIneq]| -> String {
        let atoms: Vec<String> = conj.iter().map(emit_atom).collect();
        match atoms.len() {
            1 => atoms.into_iter().next().expect("one atom"),
            _ => format!("(and {})", atoms.join(" ")),
        }
    };
    let disjuncts: Vec<String> = prop.output_condition.0.iter().map(|c| conj_text(c)).collect();
    let cond = match disjuncts.len() {
        1 => disjuncts.into_iter().next().expect("one disjunct"),
        _ => format!("(or {})", disjuncts.join(" ")),
    };
    out.push_str(&format!("(assert {cond})\n"));
    out
}
