//! Plain-text case format.
//!
//! ```text
//! # comment
//! NAME two-bus
//! REFERENCE 1
//! BUS            # id kind pd qd vmin vmax
//! 1 gen 0 0 0.9 1.1
//! 2 load 0.5 0.165 0.9 1.1
//! BRANCH         # from to g b imax
//! 1 2 1 -2 10
//! GEN            # bus pmin pmax qmin qmax
//! 1 0 2 -1 1
//! COST           # bus c1 [c2]
//! 1 1
//! ```
//!
//! Bus ids are 1-based and must cover `1..=N`. `kind` is `gen` or `load`.
//! Every generator needs exactly one `COST` row; a nonzero quadratic
//! coefficient is rejected.

use std::fmt::Write as _;
use std::path::Path;

use super::{BranchRecord, BusKind, BusRecord, GeneratorRecord, NetworkCase};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Bus,
    Branch,
    Gen,
    Cost,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn fields<const K: usize>(line: usize, toks: &[&str], what: &str, optional: usize) -> Result<()> {
    if toks.len() < K - optional || toks.len() > K {
        return Err(parse_err(line, format!("{what} row needs {} fields, found {}", K - optional, toks.len())));
    }
    Ok(())
}

fn num(line: usize, tok: &str, name: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("{name}: cannot parse {tok:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name}: value must be finite")));
    }
    Ok(v)
}

fn index(line: usize, tok: &str, name: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err(parse_err(line, format!("{name}: expected a 1-based index, found {tok:?}"))),
    }
}

pub fn parse_case(text: &str) -> Result<NetworkCase> {
    let mut name = String::from("unnamed");
    let mut reference = 0usize;
    let mut section = Section::None;
    let mut buses: Vec<(usize, BusRecord)> = Vec::new();
    let mut branches = Vec::new();
    let mut gens: Vec<(usize, GeneratorRecord)> = Vec::new();
    let mut costs: Vec<(usize, usize, f64)> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0].to_ascii_uppercase().as_str() {
            "NAME" => {
                name = toks[1..].join(" ");
                continue;
            }
            "REFERENCE" => {
                if toks.len() != 2 {
                    return Err(parse_err(line, "REFERENCE takes one bus id"));
                }
                reference = index(line, toks[1], "reference")?;
                continue;
            }
            "BUS" if toks.len() == 1 => {
                section = Section::Bus;
                continue;
            }
            "BRANCH" if toks.len() == 1 => {
                section = Section::Branch;
                continue;
            }
            "GEN" if toks.len() == 1 => {
                section = Section::Gen;
                continue;
            }
            "COST" if toks.len() == 1 => {
                section = Section::Cost;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => return Err(parse_err(line, format!("data row outside a section: {content:?}"))),
            Section::Bus => {
                fields::<6>(line, &toks, "BUS", 0)?;
                let id = index(line, toks[0], "bus id")?;
                let kind = match toks[1].to_ascii_lowercase().as_str() {
                    "gen" | "generator" => BusKind::Generator,
                    "load" => BusKind::Load,
                    other => return Err(parse_err(line, format!("bus kind must be gen or load, found {other:?}"))),
                };
                buses.push((
                    line,
                    BusRecord {
                        id,
                        kind,
                        p_demand: num(line, toks[2], "pd")?,
                        q_demand: num(line, toks[3], "qd")?,
                        v_min: num(line, toks[4], "vmin")?,
                        v_max: num(line, toks[5], "vmax")?,
                    },
                ));
            }
            Section::Branch => {
                fields::<5>(line, &toks, "BRANCH", 0)?;
                branches.push(BranchRecord {
                    from: index(line, toks[0], "from")?,
                    to: index(line, toks[1], "to")?,
                    g_series: num(line, toks[2], "g")?,
                    b_series: num(line, toks[3], "b")?,
                    i_max: num(line, toks[4], "imax")?,
                });
            }
            Section::Gen => {
                fields::<5>(line, &toks, "GEN", 0)?;
                gens.push((
                    line,
                    GeneratorRecord {
                        bus: index(line, toks[0], "bus")?,
                        cost: 0.0,
                        p_min: num(line, toks[1], "pmin")?,
                        p_max: num(line, toks[2], "pmax")?,
                        q_min: num(line, toks[3], "qmin")?,
                        q_max: num(line, toks[4], "qmax")?,
                    },
                ));
            }
            Section::Cost => {
                fields::<3>(line, &toks, "COST", 1)?;
                let bus = index(line, toks[0], "bus")?;
                let c1 = num(line, toks[1], "c1")?;
                if let Some(tok) = toks.get(2) {
                    if num(line, tok, "c2")? != 0.0 {
                        return Err(parse_err(line, "quadratic generator cost is not supported; the objective must be linear"));
                    }
                }
                costs.push((line, bus, c1));
            }
        }
    }

    // Buses may be listed in any order but must cover 1..=N exactly once.
    let n = buses.len();
    buses.sort_by_key(|(_, b)| b.id);
    for (pos, (line, b)) in buses.iter().enumerate() {
        if b.id != pos {
            return Err(parse_err(*line, format!("bus ids must be 1..={n} without gaps or repeats")));
        }
    }
    let mut priced = vec![false; gens.len()];
    for &(line, bus, c1) in &costs {
        match gens.iter().position(|(_, g)| g.bus == bus) {
            Some(k) if !priced[k] => {
                gens[k].1.cost = c1;
                priced[k] = true;
            }
            Some(_) => return Err(parse_err(line, format!("second COST row for bus {}", bus + 1))),
            None => return Err(parse_err(line, format!("COST row for bus {} which has no generator", bus + 1))),
        }
    }
    if let Some(k) = priced.iter().position(|&p| !p) {
        let (line, g) = &gens[k];
        return Err(parse_err(*line, format!("generator at bus {} has no COST row", g.bus + 1)));
    }

    NetworkCase::new(
        name,
        buses.into_iter().map(|(_, b)| b).collect(),
        branches,
        gens.into_iter().map(|(_, g)| g).collect(),
        reference,
    )
}

pub fn read_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_case(&text)
}

/// Serializes a case; `parse_case(write_case(c)) == c` bit for bit.
pub fn write_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME {}", case.name);
    let _ = writeln!(s, "REFERENCE {}", case.reference_bus + 1);
    let _ = writeln!(s, "BUS\n# id kind pd qd vmin vmax");
    for b in &case.buses {
        let kind = match b.kind {
            BusKind::Generator => "gen",
            BusKind::Load => "load",
        };
        let _ = writeln!(s, "{} {} {} {} {} {}", b.id + 1, kind, b.p_demand, b.q_demand, b.v_min, b.v_max);
    }
    let _ = writeln!(s, "BRANCH\n# from to g b imax");
    for br in &case.branches {
        let _ = writeln!(s, "{} {} {} {} {}", br.from + 1, br.to + 1, br.g_series, br.b_series, br.i_max);
    }
    let _ = writeln!(s, "GEN\n# bus pmin pmax qmin qmax");
    for g in &case.generators {
        let _ = writeln!(s, "{} {} {} {} {}", g.bus + 1, g.p_min, g.p_max, g.q_min, g.q_max);
    }
    let _ = writeln!(s, "COST\n# bus c1");
    for g in &case.generators {
        let _ = writeln!(s, "{} {}", g.bus + 1, g.cost);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::two_bus;

    const TWO_BUS: &str = "\
NAME two-bus
REFERENCE 1
BUS   # id kind pd qd vmin vmax
1 gen 0 0 0.9 1.1
2 load 0.5 0.165 0.9 1.1
BRANCH
1 2 1 -2 10
GEN
1 0 2 -1 1
COST
1 1.0 0
";

    #[test]
    fn parses_two_bus() {
        assert_eq!(parse_case(TWO_BUS).unwrap(), two_bus());
    }

    #[test]
    fn round_trips() {
        let case = two_bus();
        assert_eq!(parse_case(&write_case(&case)).unwrap(), case);
    }

    #[test]
    fn bad_number_reports_line() {
        let text = TWO_BUS.replace("0.165", "zero");
        match parse_case(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quadratic_cost_rejected() {
        let text = TWO_BUS.replace("1 1.0 0", "1 1.0 0.2");
        assert!(matches!(parse_case(&text), Err(Error::Parse { line: 11, .. })));
    }

    #[test]
    fn self_loop_is_validation_error() {
        let text = TWO_BUS.replace("1 2 1 -2 10", "1 1 1 -2 10");
        assert!(matches!(parse_case(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_cost_rejected() {
        let text = TWO_BUS.replace("COST\n1 1.0 0\n", "");
        assert!(matches!(parse_case(&text), Err(Error::Parse { .. })));
    }
}
