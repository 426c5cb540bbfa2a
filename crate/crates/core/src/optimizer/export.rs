//! Serialisation of the clustering program in CPLEX LP and free MPS formats.

use std::fmt::Write;
use std::str::FromStr;

use super::IlpModel;
use crate::simplex::Sense;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Lp,
    Mps,
}

impl FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(Self::Lp),
            "mps" => Ok(Self::Mps),
            other => Err(format!("unknown export format {other:?} (expected lp or mps)")),
        }
    }
}

pub fn export_model(m: &IlpModel, format: ExportFormat) -> String {
    match format {
        ExportFormat::Lp => to_lp(m),
        ExportFormat::Mps => to_mps(m),
    }
}

fn num(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v:?}")
}

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    let sign = if coef < 0.0 { "-" } else { "+" };
    if first && coef >= 0.0 {
        let _ = write!(out, "{} {name}", num(coef));
    } else {
        let _ = write!(out, " {sign} {} {name}", num(coef.abs()));
    }
}

fn to_lp(m: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ bubble clustering\nMinimize\n obj:");
    if m.objective.is_empty() {
        // The LP grammar needs at least one term.
        let _ = write!(out, " 0 {}", m.variables[0].name);
    } else {
        for (i, &(j, c)) in m.objective.iter().enumerate() {
            out.push(' ');
            term(&mut out, i == 0, c, &m.variables[j].name);
        }
    }
    out.push_str("\nSubject To\n");
    for r in &m.rows {
        let _ = write!(out, " {}:", r.name);
        if r.coeffs.is_empty() {
            let _ = write!(out, " 0 {}", m.variables[0].name);
        }
        for (i, &(j, c)) in r.coeffs.iter().enumerate() {
            out.push(' ');
            term(&mut out, i == 0, c, &m.variables[j].name);
        }
        let op = match r.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(r.rhs));
    }
    out.push_str("Binaries\n");
    for v in &m.variables {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

fn to_mps(m: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("NAME bubble_clustering\nROWS\n N obj\n");
    for r in &m.rows {
        let t = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {t} {}", r.name);
    }
    let mut by_col: Vec<Vec<(&str, f64)>> = vec![Vec::new(); m.variables.len()];
    for &(j, c) in &m.objective {
        by_col[j].push(("obj", c));
    }
    for r in &m.rows {
        for &(j, c) in &r.coeffs {
            by_col[j].push((r.name.as_str(), c));
        }
    }
    out.push_str("COLUMNS\n");
    out.push_str(" MARKER 'MARKER' 'INTORG'\n");
    for (j, entries) in by_col.iter().enumerate() {
        let name = &m.variables[j].name;
        if entries.is_empty() {
            let _ = writeln!(out, " {name} obj 0");
        }
        for (row, c) in entries {
            let _ = writeln!(out, " {name} {row} {}", num(*c));
        }
    }
    out.push_str(" MARKER 'MARKER' 'INTEND'\n");
    out.push_str("RHS\n");
    for r in &m.rows {
        if r.rhs != 0.0 {
            let _ = writeln!(out, " rhs {} {}", r.name, num(r.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for v in &m.variables {
        let _ = writeln!(out, " BV bnd {}", v.name);
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HcpRoster, LoadDemandTable, LocationRoster};
    use crate::optimizer::tests::four_room_inputs;
    use crate::optimizer::{build_model, ClusteringInputs, Limit};
    use crate::spatial::DistanceMatrix;
    use crate::weights::WeightMatrix;

    fn inputs<'a>(parts: &'a (WeightMatrix, DistanceMatrix, LoadDemandTable, HcpRoster, LocationRoster), d_star: Limit) -> ClusteringInputs<'a> {
        ClusteringInputs {
            weights: &parts.0,
            dist: &parts.1,
            loads: &parts.2,
            hcps: &parts.3,
            locations: &parts.4,
            k: 2,
            d_star,
            y_star: Limit::Unbounded,
        }
    }

    #[test]
    fn lp_lists_every_row_and_binary() {
        let parts = four_room_inputs();
        let m = build_model(&inputs(&parts, Limit::Finite(15.0))).unwrap();
        let lp = export_model(&m, ExportFormat::Lp);
        assert!(lp.contains("Minimize\n obj: 0.9 e_l1_l2"));
        let rows = lp.lines().skip_while(|l| *l != "Subject To").skip(1).take_while(|l| *l != "Binaries");
        assert_eq!(rows.count(), m.rows.len());
        let bins = lp.lines().skip_while(|l| *l != "Binaries").skip(1).take_while(|l| *l != "End");
        assert_eq!(bins.count(), m.variables.len());
        assert!(lp.ends_with("End\n"));
    }

    #[test]
    fn mps_sections_in_order() {
        let parts = four_room_inputs();
        let m = build_model(&inputs(&parts, Limit::Unbounded)).unwrap();
        let mps = export_model(&m, ExportFormat::Mps);
        let pos: Vec<usize> = ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
            .iter()
            .map(|s| mps.find(s).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(mps.matches(" BV bnd ").count(), m.variables.len());
    }
}
