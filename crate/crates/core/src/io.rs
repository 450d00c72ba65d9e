//! Versioned plain-text serialization of media and potentials.
//!
//! ```text
//! qcloak-layered 1
//! core 1
//! 9.0000000000000002e-1 -9.8500000000000000e1
//! shells 2
//! 0.0000000000000000e0 2.0000000000000000e0 1.0000000000000000e0 1.0000000000000000e0
//! ...
//! ```
//!
//! Lines starting with `#` are comments. Numbers carry 17 significant digits
//! so every value round-trips exactly.

use crate::error::{CloakError, Result};
use crate::synthesis::{CorePotential, Layer, LayeredMedium, PotentialShell, RadialPotential};

pub const LAYERED_MAGIC: &str = "qcloak-layered";
pub const POTENTIAL_MAGIC: &str = "qcloak-potential";
pub const FORMAT_VERSION: u32 = 1;

/// Scientific notation with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(values: &[f64]) -> String {
    values.iter().map(|&v| format_number(v)).collect::<Vec<_>>().join(" ")
}

fn write_core(out: &mut String, core: &CorePotential) {
    out.push_str(&format!("core {}\n", core.steps().len()));
    for &(r, v) in core.steps() {
        out.push_str(&row(&[r, v]));
        out.push('\n');
    }
}

pub fn write_layered(medium: &LayeredMedium) -> String {
    let mut out = format!("{LAYERED_MAGIC} {FORMAT_VERSION}\n");
    write_core(&mut out, medium.core());
    out.push_str(&format!("shells {}\n", medium.shells().len()));
    for s in medium.shells() {
        out.push_str(&row(&[s.r_in, s.r_out, s.sigma, s.a]));
        out.push('\n');
    }
    out
}

pub fn write_potential(potential: &RadialPotential) -> String {
    let mut out = format!("{POTENTIAL_MAGIC} {FORMAT_VERSION}\n");
    write_core(&mut out, potential.core());
    out.push_str(&format!("shells {}\n", potential.shells().len()));
    for s in potential.shells() {
        out.push_str(&row(&[s.r_in, s.r_out, s.v, s.gauge_sigma]));
        out.push('\n');
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next_content(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((i + 1, line));
            }
        }
        Err(CloakError::Parse {
            line: 0,
            message: "unexpected end of input".into(),
        })
    }

    fn header(&mut self, magic: &str) -> Result<()> {
        let (n, line) = self.next_content()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(magic) {
            return Err(parse_error(n, format!("expected `{magic}` header")));
        }
        match parts.next().map(str::parse::<u32>) {
            Some(Ok(FORMAT_VERSION)) => Ok(()),
            _ => Err(parse_error(n, format!("unsupported version, expected {FORMAT_VERSION}"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, line) = self.next_content()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(parse_error(n, format!("expected `{key} <count>`")));
        }
        parts
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| parse_error(n, format!("`{key}` needs a count")))
    }

    fn numbers<const N: usize>(&mut self) -> Result<[f64; N]> {
        let (n, line) = self.next_content()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_error(n, format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        values
            .try_into()
            .map_err(|v: Vec<f64>| parse_error(n, format!("expected {N} numbers, found {}", v.len())))
    }

    fn finish(&mut self) -> Result<()> {
        match self.next_content() {
            Ok((n, _)) => Err(parse_error(n, "trailing content".into())),
            Err(_) => Ok(()),
        }
    }
}

fn parse_error(line: usize, message: String) -> CloakError {
    CloakError::Parse { line, message }
}

fn read_core(lines: &mut Lines) -> Result<CorePotential> {
    let n = lines.count("core")?;
    let steps = (0..n)
        .map(|_| lines.numbers::<2>().map(|[r, v]| (r, v)))
        .collect::<Result<Vec<_>>>()?;
    CorePotential::new(steps)
}

pub fn read_layered(text: &str) -> Result<LayeredMedium> {
    let mut lines = Lines::new(text);
    lines.header(LAYERED_MAGIC)?;
    let core = read_core(&mut lines)?;
    let n = lines.count("shells")?;
    let shells = (0..n)
        .map(|_| {
            lines
                .numbers::<4>()
                .map(|[r_in, r_out, sigma, a]| Layer { r_in, r_out, sigma, a })
        })
        .collect::<Result<Vec<_>>>()?;
    lines.finish()?;
    LayeredMedium::new(shells, core)
}

pub fn read_potential(text: &str) -> Result<RadialPotential> {
    let mut lines = Lines::new(text);
    lines.header(POTENTIAL_MAGIC)?;
    let core = read_core(&mut lines)?;
    let n = lines.count("shells")?;
    let shells = (0..n)
        .map(|_| {
            lines.numbers::<4>().map(|[r_in, r_out, v, gauge_sigma]| PotentialShell {
                r_in,
                r_out,
                v,
                gauge_sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    lines.finish()?;
    RadialPotential::new(shells, core)
}
