//! Columnar text output. Every file starts with `#` comment lines carrying
//! the config hash and crate version, then one header line and comma
//! separated rows.

use crate::error::{Error, Result};
use crate::selfsim::{BetaRow, Trajectory};
use faer::c64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub version: String,
}

impl Stamp {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self { config_hash: config_hash.into(), version: format!("nsring {VERSION}") }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Shortest round-trip decimal form of each value; `inf` and `nan` as
    /// spelled by numpy.
    pub fn render(&self, stamp: &Stamp) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", stamp.version);
        let _ = writeln!(s, "# config {}", stamp.config_hash);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_value(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path, stamp: &Stamp) -> Result<()> {
        std::fs::write(path, self.render(stamp))?;
        Ok(())
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SpectrumCloud,
    SweepCurve,
    NormLadder,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum-cloud" => Ok(Self::SpectrumCloud),
            "sweep-curve" => Ok(Self::SweepCurve),
            "norm-ladder" => Ok(Self::NormLadder),
            other => Err(Error::invalid(format!("unknown plot kind '{other}'"))),
        }
    }
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SpectrumCloud => "spectrum-cloud",
            Self::SweepCurve => "sweep-curve",
            Self::NormLadder => "norm-ladder",
        }
    }
}

/// Result sets that can be turned into plot data.
pub enum ResultSet<'a> {
    Spectrum(&'a [c64]),
    BetaSweep(&'a [BetaRow]),
    Trajectory(&'a Trajectory),
}

pub fn plotdata(set: &ResultSet, kind: PlotKind) -> Result<Table> {
    match (set, kind) {
        (ResultSet::Spectrum(ev), PlotKind::SpectrumCloud) => {
            let mut t = Table::new(&["re", "im"]);
            ev.iter().for_each(|l| t.push(vec![l.re, l.im]));
            Ok(t)
        }
        (ResultSet::BetaSweep(rows), PlotKind::SweepCurve) => {
            let mut t = Table::new(&["beta", "re_lambda", "distance"]);
            rows.iter().for_each(|r| t.push(vec![r.beta, r.re, r.distance]));
            Ok(t)
        }
        (ResultSet::Trajectory(tr), PlotKind::NormLadder) => {
            let mut t = Table::new(&["tau", "log_l2", "log_h1", "log_h2"]);
            for (tau, n) in tr.tau.iter().zip(&tr.norms) {
                t.push(vec![*tau, n[0].ln(), n[1].ln(), n[2].ln()]);
            }
            Ok(t)
        }
        (_, k) => Err(Error::invalid(format!("result set has no {} view", k.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spectrum_is_header_only() {
        let t = plotdata(&ResultSet::Spectrum(&[]), PlotKind::SpectrumCloud).unwrap();
        let text = t.render(&Stamp::new("abc"));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![&format!("# nsring {VERSION}")[..], "# config abc", "re,im"]);
    }

    #[test]
    fn values_round_trip() {
        let mut t = Table::new(&["x"]);
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::INFINITY] {
            t.push(vec![v]);
        }
        let text = t.render(&Stamp::new("h"));
        let back: Vec<f64> = text.lines().skip(3).map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::INFINITY]);
    }

    #[test]
    fn unknown_or_mismatched_kind_is_an_error() {
        assert!("histogram".parse::<PlotKind>().is_err());
        assert!(plotdata(&ResultSet::Spectrum(&[]), PlotKind::NormLadder).is_err());
    }

    proptest::proptest! {
        #[test]
        fn spectrum_view_keeps_every_eigenvalue(
            pts in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..40),
        ) {
            let ev: Vec<c64> = pts.iter().map(|(r, i)| c64::new(*r, *i)).collect();
            let t = plotdata(&ResultSet::Spectrum(&ev), PlotKind::SpectrumCloud).unwrap();
            let text = t.render(&Stamp::new("h"));
            let rows: Vec<(f64, f64)> = text
                .lines()
                .skip(3)
                .map(|l| {
                    let (a, b) = l.split_once(',').unwrap();
                    (a.parse().unwrap(), b.parse().unwrap())
                })
                .collect();
            proptest::prop_assert_eq!(rows, pts);
        }
    }
}
