//! CPLEX LP text export, for cross-checking a model with an external solver.

use std::collections::HashSet;
use std::fmt::Write;

use crate::model::{Model, ObjectiveSense};

/// Renders `model` in LP format. Ranged rows are written as two rows with
/// `_lo`/`_hi` suffixes; names are sanitized and made unique.
pub fn to_lp_string(model: &Model) -> String {
    let mut used = HashSet::new();
    let var_names: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| unique(sanitize(&v.name, 'x', i), &mut used))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name());
    out.push_str(match model.sense() {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    let obj: Vec<(usize, f64)> = model
        .objective()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .collect();
    let _ = writeln!(out, " obj: {}", linear(&obj, &var_names));
    out.push_str("Subject To\n");
    let mut row_used = HashSet::new();
    for (r, row) in model.rows().iter().enumerate() {
        let name = unique(sanitize(&row.name, 'c', r), &mut row_used);
        let terms: Vec<(usize, f64)> = row.terms.iter().map(|&(v, c)| (v.index(), c)).collect();
        let lhs = linear(&terms, &var_names);
        if row.lower == row.upper {
            let _ = writeln!(out, " {name}: {lhs} = {}", num(row.upper));
        } else {
            let both = row.lower.is_finite() && row.upper.is_finite();
            if row.lower.is_finite() {
                let n = if both {
                    format!("{name}_lo")
                } else {
                    name.clone()
                };
                let _ = writeln!(out, " {n}: {lhs} >= {}", num(row.lower));
            }
            if row.upper.is_finite() {
                let n = if both {
                    format!("{name}_hi")
                } else {
                    name.clone()
                };
                let _ = writeln!(out, " {n}: {lhs} <= {}", num(row.upper));
            }
        }
    }
    out.push_str("Bounds\n");
    let mut general = Vec::new();
    let mut binary = Vec::new();
    for (v, name) in model.vars().iter().zip(&var_names) {
        let is_binary = v.integer && v.lower == 0.0 && v.upper == 1.0;
        if is_binary {
            binary.push(name.as_str());
            continue;
        }
        if v.integer {
            general.push(name.as_str());
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {}", num(v.lower));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", num(v.lower));
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", num(v.upper));
            }
        }
    }
    if !general.is_empty() {
        out.push_str("General\n");
        for chunk in general.chunks(10) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    if !binary.is_empty() {
        out.push_str("Binary\n");
        for chunk in binary.chunks(10) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn linear(terms: &[(usize, f64)], names: &[String]) -> String {
    if terms.is_empty() {
        return "0 x_zero_".to_string();
    }
    let mut s = String::new();
    for (k, &(j, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        if k > 0 || c < 0.0 {
            let _ = write!(s, "{sign} ");
        }
        let a = c.abs();
        if a != 1.0 {
            let _ = write!(s, "{} ", num(a));
        }
        s.push_str(&names[j]);
        s.push(' ');
    }
    s.trim_end().to_string()
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn sanitize(name: &str, prefix: char, index: usize) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.!#$%&()/,;?@{}~'".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        s = format!("{prefix}{index}");
    }
    if s.starts_with(|c: char| c.is_ascii_digit() || c == '.') || s.starts_with(['e', 'E']) {
        s.insert(0, prefix);
    }
    s
}

fn unique(base: String, used: &mut HashSet<String>) -> String {
    if used.insert(base.clone()) {
        return base;
    }
    let mut k = 1;
    loop {
        let cand = format!("{base}#{k}");
        if used.insert(cand.clone()) {
            return cand;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Relation;

    #[test]
    fn writes_sections() {
        let mut m = Model::new("tiny");
        let x = m.add_binary("x[0]");
        let y = m.add_integer("y", 0.0, 7.0);
        m.add_constraint("cap", [(x, 1.0), (y, 2.0)], Relation::Le, 5.0);
        m.add_range("band", [(y, 1.0)], 1.0, 3.0);
        m.set_objective(ObjectiveSense::Maximize, [(x, 1.0), (y, -1.0)]);
        let s = to_lp_string(&m);
        assert!(s.contains("Maximize\n obj: x_0_ - y\n"));
        assert!(s.contains(" cap: x_0_ + 2 y <= 5\n"));
        assert!(s.contains(" band_lo: y >= 1\n band_hi: y <= 3\n"));
        assert!(s.contains(" 0 <= y <= 7\n"));
        assert!(s.contains("General\n y\n"));
        assert!(s.contains("Binary\n x_0_\n"));
        assert!(s.ends_with("End\n"));
    }
}
