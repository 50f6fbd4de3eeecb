//! Plain-text dump of a [`ScenarioProgram`] for debugging.
//!
//! ```text
//! scenario-program dim <d> templates <t> rows <r>
//! constant <c>
//! cost            d lines of d numbers, row-major
//! linear          1 line of d numbers
//! templates       t lines of d numbers
//! rows            r lines: <template> <rhs> <tag...>
//! ```
//!
//! Tags are `bound <step> <input> lower|upper`, `comfort <scenario> <zone>
//! <step>` or `general`. Numbers use the shortest representation that
//! parses back to the same `f64`, so a dump round-trips exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use scenplan_core::{ConstraintRow, RowTag, ScenarioProgram};

fn join(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").unwrap();
    }
    s
}

pub fn dump_program(p: &ScenarioProgram) -> String {
    let d = p.dim();
    let t = p.templates();
    let mut out = String::new();
    writeln!(
        out,
        "scenario-program dim {d} templates {} rows {}",
        t.nrows(),
        p.rows().len()
    )
    .unwrap();
    writeln!(out, "constant {:?}", p.constant()).unwrap();
    out.push_str("cost\n");
    for r in p.cost_matrix().row_iter() {
        writeln!(out, "{}", join(r.iter().copied())).unwrap();
    }
    writeln!(out, "linear\n{}", join(p.linear().iter().copied())).unwrap();
    out.push_str("templates\n");
    for r in t.row_iter() {
        writeln!(out, "{}", join(r.iter().copied())).unwrap();
    }
    out.push_str("rows\n");
    for row in p.rows() {
        let tag = match row.tag {
            RowTag::InputBound { step, input, upper } => {
                format!("bound {step} {input} {}", if upper { "upper" } else { "lower" })
            }
            RowTag::Comfort { scenario, zone, step } => format!("comfort {scenario} {zone} {step}"),
            RowTag::General => "general".into(),
        };
        writeln!(out, "{} {:?} {tag}", row.template, row.rhs).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), String> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| format!("unexpected end of input, expected {what}"))
    }

    fn expect(&mut self, keyword: &str) -> Result<(), String> {
        let (n, l) = self.next(keyword)?;
        if l != keyword {
            return Err(format!("line {n}: expected `{keyword}`, found `{l}`"));
        }
        Ok(())
    }

    fn numbers(&mut self, what: &str, count: usize) -> Result<Vec<f64>, String> {
        let (n, l) = self.next(what)?;
        let values = l
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| format!("line {n}: bad number `{tok}`: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != count {
            return Err(format!(
                "line {n}: expected {count} numbers in {what}, found {}",
                values.len()
            ));
        }
        Ok(values)
    }
}

fn field<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, String> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| format!("line {line}: missing or bad {what}"))
}

pub fn load_program(text: &str) -> Result<ScenarioProgram, String> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, header) = lines.next("header")?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 7 || h[0] != "scenario-program" || h[1] != "dim" || h[3] != "templates" || h[5] != "rows" {
        return Err(format!("line {n}: malformed header"));
    }
    let d: usize = field(n, Some(h[2]), "dim")?;
    let nt: usize = field(n, Some(h[4]), "template count")?;
    let nr: usize = field(n, Some(h[6]), "row count")?;

    let (n, c) = lines.next("constant")?;
    let constant: f64 = field(n, c.strip_prefix("constant "), "constant")?;
    lines.expect("cost")?;
    let mut cost = Vec::with_capacity(d * d);
    for _ in 0..d {
        cost.extend(lines.numbers("cost", d)?);
    }
    lines.expect("linear")?;
    let linear = lines.numbers("linear", d)?;
    lines.expect("templates")?;
    let mut templates = Vec::with_capacity(nt * d);
    for _ in 0..nt {
        templates.extend(lines.numbers("templates", d)?);
    }
    lines.expect("rows")?;
    let mut rows = Vec::with_capacity(nr);
    for _ in 0..nr {
        let (n, l) = lines.next("row")?;
        let mut tok = l.split_whitespace();
        let template = field(n, tok.next(), "template index")?;
        let rhs = field(n, tok.next(), "rhs")?;
        let tag = match tok.next() {
            Some("bound") => RowTag::InputBound {
                step: field(n, tok.next(), "step")?,
                input: field(n, tok.next(), "input")?,
                upper: match tok.next() {
                    Some("upper") => true,
                    Some("lower") => false,
                    _ => return Err(format!("line {n}: bound side must be upper or lower")),
                },
            },
            Some("comfort") => RowTag::Comfort {
                scenario: field(n, tok.next(), "scenario")?,
                zone: field(n, tok.next(), "zone")?,
                step: field(n, tok.next(), "step")?,
            },
            Some("general") => RowTag::General,
            _ => return Err(format!("line {n}: unknown row tag")),
        };
        if tok.next().is_some() {
            return Err(format!("line {n}: trailing fields"));
        }
        rows.push(ConstraintRow { template, rhs, tag });
    }
    ScenarioProgram::new(
        DMatrix::from_row_slice(d, d, &cost),
        DVector::from_vec(linear),
        constant,
        DMatrix::from_row_slice(nt, d, &templates),
        rows,
    )
    .map_err(|e| e.to_string())
}
