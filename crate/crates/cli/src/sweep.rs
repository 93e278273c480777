//! Parameter sweeps over any scalar field of a [`RunSpec`].
//!
//! Points are the Cartesian product of the declared axes, first axis slowest. Each
//! point runs in its own `point_XXXX` directory, so outputs do not depend on the
//! number of workers or on completion order.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use toml::{Table, Value};

use crate::commands;
use crate::error::CliError;
use crate::output::write_file;
use crate::spec::{parse_error, RunSpec, SweepAxis, SweepCommand};

/// Index tuples of the grid in row-major order.
pub fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<usize>> {
    let mut points = vec![Vec::new()];
    for a in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..a.values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    points
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    let bad = || CliError::Config(format!("sweep path `{path}` does not name a field"));
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(bad)?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(bad)?;
    }
    if matches!(cur.get(last), Some(Value::Table(_)) | Some(Value::Array(_))) {
        return Err(CliError::Config(format!("sweep path `{path}` is not a scalar field")));
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// The spec of one grid point, with its own output directory and no sweep section.
pub fn point_spec(base: &RunSpec, axes: &[SweepAxis], index: &[usize], k: usize) -> Result<RunSpec, CliError> {
    let mut table: Table = toml::from_str(&base.to_toml()).expect("serialized spec parses");
    table.remove("sweep");
    for (a, &i) in axes.iter().zip(index) {
        set_path(&mut table, &a.path, a.values[i].clone())?;
    }
    let dir = PathBuf::from(&base.output.dir).join(format!("point_{k:04}"));
    set_path(&mut table, "output.dir", Value::String(dir.display().to_string()))?;
    let text = toml::to_string(&table).expect("table serializes");
    let spec: RunSpec = toml::from_str(&text).map_err(|e| CliError::Config(parse_error(&text, &e).to_string()))?;
    spec.validate()?;
    Ok(spec)
}

fn run_point(spec: &RunSpec, command: SweepCommand) -> Result<String, CliError> {
    match command {
        SweepCommand::Gap => commands::gap(spec),
        SweepCommand::Solve => commands::solve(spec),
        SweepCommand::Integrate => commands::integrate(spec, None),
        SweepCommand::Diagnose => commands::diagnose(spec),
    }
}

pub fn sweep(base: &RunSpec, workers: usize) -> Result<String, CliError> {
    let section = base
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("the spec has no [sweep] section".into()))?;
    if section.axis.is_empty() {
        return Err(CliError::Config("[sweep] declares no axes".into()));
    }
    let points = grid_points(&section.axis);
    let specs = points
        .iter()
        .enumerate()
        .map(|(k, p)| point_spec(base, &section.axis, p, k))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<String, CliError>> = pool.install(|| {
        specs
            .par_iter()
            .map(|s| {
                let dir = PathBuf::from(&s.output.dir);
                write_file(&dir.join("spec.toml"), &s.to_toml())?;
                let r = run_point(s, section.command);
                match &r {
                    Ok(text) => write_file(&dir.join("stdout.txt"), text)?,
                    Err(e) => write_file(&dir.join("error.txt"), &format!("{e}\n"))?,
                }
                r
            })
            .collect()
    });
    let mut index = String::from("index");
    for a in &section.axis {
        let _ = write!(index, ",{}", a.path);
    }
    index.push_str(",status\n");
    for (k, (p, r)) in points.iter().zip(&results).enumerate() {
        let _ = write!(index, "{k}");
        for (a, &i) in section.axis.iter().zip(p) {
            let _ = write!(index, ",{}", a.values[i]);
        }
        let status = r.as_ref().map_or_else(|e| e.exit_code(), |_| 0);
        let _ = writeln!(index, ",{status}");
    }
    write_file(&PathBuf::from(&base.output.dir).join("sweep.csv"), &index)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    if let Some(Err(first)) = results.into_iter().find(|r| r.is_err()) {
        return Err(first);
    }
    Ok(format!("{} points, {failed} failed\n", points.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(path: &str, n: usize) -> SweepAxis {
        SweepAxis {
            path: path.into(),
            values: (0..n).map(|i| Value::Float(i as f64)).collect(),
        }
    }

    #[test]
    fn grid_is_row_major() {
        let p = grid_points(&[axis("a", 2), axis("b", 3)]);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 0]);
        assert_eq!(p[1], vec![0, 1]);
        assert_eq!(p[3], vec![1, 0]);
    }

    #[test]
    fn point_specs_override_fields() {
        let base = RunSpec::parse(
            "[chain]\nhalf_width = 2\ngamma = 0.5\nomega = 3.0\n[forcing]\nmodes = [[1, 0.5, 0.0]]\n[output]\ndir = \"base\"\n",
        )
        .unwrap();
        let axes = vec![
            SweepAxis {
                path: "chain.gamma".into(),
                values: vec![Value::Float(0.25)],
            },
            SweepAxis {
                path: "chain.half_width".into(),
                values: vec![Value::Integer(5)],
            },
        ];
        let s = point_spec(&base, &axes, &[0, 0], 7).unwrap();
        assert_eq!(s.chain.gamma, 0.25);
        assert_eq!(s.chain.half_width, 5);
        assert_eq!(s.output.dir, PathBuf::from("base").join("point_0007").display().to_string());
        let typo = vec![SweepAxis {
            path: "chain.gama".into(),
            values: vec![Value::Float(0.1)],
        }];
        assert_eq!(point_spec(&base, &typo, &[0], 0).unwrap_err().exit_code(), 2);
        let nested = vec![SweepAxis {
            path: "chain".into(),
            values: vec![Value::Float(0.1)],
        }];
        assert!(point_spec(&base, &nested, &[0], 0).is_err());
    }
}
