//! Deterministic output files: CSV (LF line endings, `%.12e` numbers),
//! optional PGM heatmaps, and a meta.json report.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use solq::correlation::CorrelationMap;

use crate::config::{ObservableConfig, ScenarioConfig};
use crate::runner::TupleOutcome;

/// C-style `%.12e` (two-digit signed exponent); `nan` for missing values.
pub fn fmt_e(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("exponent digits");
    format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn write_file(path: &Path, content: &[u8]) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    f.write_all(content)?;
    Ok(())
}

/// Header row with slot centers, then the C matrix row-major.
fn map_csv(map: &CorrelationMap) -> String {
    let s = map.partition.n_slots();
    let mut out = String::new();
    let header: Vec<String> = map.partition.centers().iter().map(|&c| fmt_e(c)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..s {
        let row: Vec<String> = (0..s).map(|j| fmt_e(map.c[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// 8-bit grayscale PGM: linear map of [-1, 1] onto [0, 255], masked slots
/// black.
fn map_pgm(map: &CorrelationMap) -> Vec<u8> {
    let s = map.partition.n_slots();
    let mut out = format!("P5\n{s} {s}\n255\n").into_bytes();
    for i in 0..s {
        for j in 0..s {
            let byte = if map.mask[i] || map.mask[j] {
                0u8
            } else {
                let v = (map.c[(i, j)].clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0;
                v.round() as u8
            };
            out.push(byte);
        }
    }
    out
}

/// Column z plus one column per parameter tuple.
fn curve_csv(
    labels: &[&str],
    zs: &[f64],
    columns: &[Option<Vec<f64>>],
) -> String {
    let mut out = String::new();
    out.push('z');
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (row, &z) in zs.iter().enumerate() {
        out.push_str(&fmt_e(z));
        for col in columns {
            out.push(',');
            match col {
                Some(vals) => out.push_str(&fmt_e(vals[row])),
                None => out.push_str("nan"),
            }
        }
        out.push('\n');
    }
    out
}

fn format_z(z: f64) -> String {
    format!("{z}")
}

#[derive(Serialize)]
struct TupleMeta<'a> {
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: &'a Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conservation: &'a Option<crate::runner::ConservationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: &'a Option<crate::runner::OracleReport>,
    /// Checkpoints where the pair split fell back to t = 0.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pair_boundary_fallback_z: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    masked_slots: Vec<(f64, Vec<usize>)>,
    seconds: f64,
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'a str,
    config: &'a ScenarioConfig,
    files: Vec<String>,
    warnings: &'a [String],
    tuples: Vec<TupleMeta<'a>>,
}

/// Write every output artifact; returns the list of files written.
pub fn write_outputs(
    cfg: &ScenarioConfig,
    outcomes: &[TupleOutcome],
    warnings: &[String],
    out_dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let many = outcomes.len() > 1;

    // Correlation maps (CSV + optional PGM).
    let write_pgm = cfg.observables.iter().any(|o| {
        matches!(
            o,
            ObservableConfig::Map {
                write_pgm: true,
                ..
            }
        )
    });
    for (ti, outcome) in outcomes.iter().enumerate() {
        for map in &outcome.maps {
            let stem = if many {
                format!("map_t{ti}_z{}", format_z(map.z))
            } else {
                format!("map_z{}", format_z(map.z))
            };
            let csv = out_dir.join(format!("{stem}.csv"));
            write_file(&csv, map_csv(map).as_bytes())?;
            files.push(csv);
            if write_pgm {
                let pgm = out_dir.join(format!("{stem}.pgm"));
                write_file(&pgm, &map_pgm(map))?;
                files.push(pgm);
            }
        }
    }

    // Pair-correlation curves.
    let has_pair = cfg
        .observables
        .iter()
        .any(|o| matches!(o, ObservableConfig::Pair { .. }));
    if has_pair {
        let zs: Vec<f64> = cfg
            .observables
            .iter()
            .find_map(|o| match o {
                ObservableConfig::Pair { .. } => Some(o.checkpoints()),
                _ => None,
            })
            .unwrap_or_default();
        let labels: Vec<&str> = outcomes.iter().map(|t| t.label.as_str()).collect();
        let columns: Vec<Option<Vec<f64>>> = outcomes
            .iter()
            .map(|t| {
                (t.error.is_none())
                    .then(|| t.pair_curve.iter().map(|p| p.c12).collect::<Vec<f64>>())
            })
            .collect();
        let path = out_dir.join("c12_vs_z.csv");
        write_file(&path, curve_csv(&labels, &zs, &columns).as_bytes())?;
        files.push(path);
    }

    // Polarization curves plus the classical x-energy trace.
    let has_pol = cfg
        .observables
        .iter()
        .any(|o| matches!(o, ObservableConfig::PolarizationPair { .. }));
    if has_pol {
        let zs: Vec<f64> = cfg
            .observables
            .iter()
            .find_map(|o| match o {
                ObservableConfig::PolarizationPair { .. } => Some(o.checkpoints()),
                _ => None,
            })
            .unwrap_or_default();
        let labels: Vec<&str> = outcomes.iter().map(|t| t.label.as_str()).collect();
        let columns: Vec<Option<Vec<f64>>> = outcomes
            .iter()
            .map(|t| {
                (t.error.is_none())
                    .then(|| t.pol_curve.iter().map(|p| p.c12).collect::<Vec<f64>>())
            })
            .collect();
        let path = out_dir.join("cxy_vs_z.csv");
        write_file(&path, curve_csv(&labels, &zs, &columns).as_bytes())?;
        files.push(path);

        // Trace zs come from the first non-failed tuple (identical for all).
        if let Some(t0) = outcomes.iter().find(|t| !t.trace.is_empty()) {
            let trace_zs: Vec<f64> = t0.trace.iter().map(|(z, _)| *z).collect();
            let columns: Vec<Option<Vec<f64>>> = outcomes
                .iter()
                .map(|t| {
                    (!t.trace.is_empty())
                        .then(|| t.trace.iter().map(|(_, e)| *e).collect::<Vec<f64>>())
                })
                .collect();
            let path = out_dir.join("ex_energy_vs_z.csv");
            write_file(&path, curve_csv(&labels, &trace_zs, &columns).as_bytes())?;
            files.push(path);
        }
    }

    // meta.json
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        files: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        warnings,
        tuples: outcomes
            .iter()
            .map(|t| TupleMeta {
                label: &t.label,
                error: &t.error,
                conservation: &t.conservation,
                oracle: &t.oracle,
                pair_boundary_fallback_z: t
                    .pair_curve
                    .iter()
                    .filter(|p| p.boundary_fallback)
                    .map(|p| p.z)
                    .collect(),
                masked_slots: t
                    .maps
                    .iter()
                    .filter_map(|m| {
                        let masked: Vec<usize> = m
                            .mask
                            .iter()
                            .enumerate()
                            .filter_map(|(i, &x)| x.then_some(i))
                            .collect();
                        (!masked.is_empty()).then_some((m.z, masked))
                    })
                    .collect(),
                seconds: t.seconds,
            })
            .collect(),
    };
    let meta_path = out_dir.join("meta.json");
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    write_file(&meta_path, json.as_bytes())?;
    files.push(meta_path);

    Ok(files)
}

/// Human-readable run summary printed to stdout.
pub fn print_report(outcome: &crate::runner::RunOutcome) {
    let mut s = String::new();
    for t in &outcome.tuples {
        match &t.error {
            Some(e) => {
                let _ = writeln!(s, "tuple {}: FAILED ({e}) after {:.1}s", t.label, t.seconds);
            }
            None => {
                let _ = write!(s, "tuple {}: ok in {:.1}s", t.label, t.seconds);
                if let Some(c) = &t.conservation {
                    let _ = write!(
                        s,
                        "  [dN/N = {:.2e}, dH/H = {:.2e}]",
                        c.photon_number_drift, c.hamiltonian_drift
                    );
                }
                if let Some(o) = &t.oracle {
                    let _ = write!(
                        s,
                        "  [oracle dev = {:.2e}, bogoliubov = {:.2e}/{:.2e}]",
                        o.max_relative_covariance_deviation,
                        o.bogoliubov_unitarity_residual,
                        o.bogoliubov_symmetry_residual
                    );
                }
                let _ = writeln!(s);
            }
        }
    }
    for w in &outcome.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for f in &outcome.files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    print!("{s}");
}
