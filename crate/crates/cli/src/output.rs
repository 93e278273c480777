//! CSV and JSON writers. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use forced_chain::spectral::{default_grid, HarmonicField, PeriodicSolution};
use forced_chain::{ChainConfig, ChainState, Cx};
use serde::Serialize;

use crate::error::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// `site,m,re,im` for `m = 0..=M`, with `site` the lattice coordinate `x`.
pub fn harmonics_csv(field: &HarmonicField<f64>) -> String {
    let n = field.half_width() as i64;
    let mut s = String::from("site,m,re,im\n");
    for m in 0..=field.max_harmonic() {
        for (i, c) in field.harmonic(m).iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", i as i64 - n, m, num(c.re), num(c.im));
        }
    }
    s
}

/// Reads a harmonics table written by [`harmonics_csv`] back into a solution for `cfg`.
pub fn read_harmonics_csv(text: &str, cfg: &ChainConfig<f64>) -> Result<PeriodicSolution<f64>, CliError> {
    let bad = |line: usize, why: &str| CliError::Config(format!("solution csv line {line}: {why}"));
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            if line.trim() != "site,m,re,im" {
                return Err(bad(1, "expected header `site,m,re,im`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(k + 1, "expected four columns"));
        }
        let site: i64 = parts[0].trim().parse().map_err(|_| bad(k + 1, "site"))?;
        let m: usize = parts[1].trim().parse().map_err(|_| bad(k + 1, "m"))?;
        let re: f64 = parts[2].trim().parse().map_err(|_| bad(k + 1, "re"))?;
        let im: f64 = parts[3].trim().parse().map_err(|_| bad(k + 1, "im"))?;
        rows.push((k + 1, site, m, Cx::new(re, im)));
    }
    let n = cfg.half_width() as i64;
    let top = rows.iter().map(|r| r.2).max().unwrap_or(0);
    let mut field = HarmonicField::zeros(cfg.half_width(), top, default_grid(top), cfg.omega())
        .map_err(|e| CliError::Config(e.to_string()))?;
    for (line, site, m, c) in rows {
        if site.abs() > n {
            return Err(bad(line, "site outside the configured chain"));
        }
        field.set((site + n) as usize, m, c);
    }
    Ok(PeriodicSolution::new(field, cfg))
}

/// `k,t,site,q,p` for a sequence of states.
pub fn states_csv(states: &[ChainState<f64>]) -> String {
    let mut s = String::from("k,t,site,q,p\n");
    for (k, st) in states.iter().enumerate() {
        let n = st.half_width() as i64;
        for (i, (q, p)) in st.q.iter().zip(&st.p).enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", k, num(st.t), i as i64 - n, num(*q), num(*p));
        }
    }
    s
}

/// `k,t,distance`.
pub fn distances_csv(states: &[ChainState<f64>], d: &[f64]) -> String {
    let mut s = String::from("k,t,distance\n");
    for (k, (st, v)) in states.iter().zip(d).enumerate() {
        let _ = writeln!(s, "{},{},{}", k, num(st.t), num(*v));
    }
    s
}
