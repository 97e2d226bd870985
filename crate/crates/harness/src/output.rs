//! CSV tables and gnuplot-ready TSV series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::montecarlo::{cluster_method_name, MonteCarloResult, Variant, CLUSTER_METHODS, TRIAL_CSV_HEADER};

/// Columnar TSV: `#` comment lines, a `#`-prefixed header, then rows.
/// No rows gives a header-only file.
pub fn tsv(comments: &[&str], columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    let _ = writeln!(s, "# {}", columns.join("\t"));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join("\t"));
    }
    s
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    written.push(path);
    Ok(())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn denoising_csv(r: &MonteCarloResult) -> String {
    let mut s = String::from("snr_db,denoiser,gamma_bd_db,gamma_ad_db,relative_gain_pct\n");
    for row in &r.denoising {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            row.snr_db,
            row.denoiser,
            row.gamma_bd,
            row.gamma_ad,
            opt_cell(row.relative_gain_pct)
        );
    }
    s
}

pub fn cluster_cm_csv(r: &MonteCarloResult) -> String {
    let mut s = String::from("snr_db,method,cm_mean,cm_median\n");
    for row in &r.clustering {
        let _ = writeln!(s, "{},{},{},{}", row.snr_db, row.method, row.cm_mean, row.cm_median);
    }
    s
}

pub fn cluster_mae_csv(r: &MonteCarloResult) -> String {
    let mut s = String::from("snr_db,method,mae\n");
    for row in &r.clustering {
        let _ = writeln!(s, "{},{},{}", row.snr_db, row.method, row.mae);
    }
    s
}

pub fn ecm_tsv(r: &MonteCarloResult) -> String {
    let columns: Vec<&str> = std::iter::once("snr").chain(CLUSTER_METHODS.iter().map(|&m| cluster_method_name(m))).collect();
    let rows: Vec<Vec<f64>> = r
        .snr_db
        .iter()
        .filter(|&&snr| r.clustering.iter().any(|c| c.snr_db == snr))
        .map(|&snr| {
            std::iter::once(snr)
                .chain(CLUSTER_METHODS.iter().map(|&m| r.cluster_row(snr, cluster_method_name(m)).map_or(f64::NAN, |c| c.ecm)))
                .collect()
        })
        .collect();
    tsv(&["effective clustering metric (1 + AE) log10(CM) vs receive SNR (dB)"], &columns, &rows)
}

fn variant_tsv(r: &MonteCarloResult, comment: &str, value: impl Fn(&crate::montecarlo::EstimationRow) -> f64) -> String {
    let columns: Vec<&str> = std::iter::once("snr").chain(Variant::ALL.iter().map(|v| v.name())).collect();
    let rows: Vec<Vec<f64>> = r
        .snr_db
        .iter()
        .filter(|&&snr| r.estimation.iter().any(|e| e.snr_db == snr))
        .map(|&snr| {
            std::iter::once(snr)
                .chain(Variant::ALL.iter().map(|&v| r.estimation_row(snr, v).map_or(f64::NAN, &value)))
                .collect()
        })
        .collect();
    tsv(&[comment], &columns, &rows)
}

pub fn dmse_tsv(r: &MonteCarloResult) -> String {
    variant_tsv(r, "DMSE of the signature estimates vs receive SNR (dB)", |e| e.dmse)
}

pub fn gain_nmse_tsv(r: &MonteCarloResult) -> String {
    variant_tsv(r, "NMSE of the complex path gains vs receive SNR (dB)", |e| e.gain_nmse)
}

pub fn path_errors_tsv(r: &MonteCarloResult) -> String {
    let names: Vec<String> = Variant::ALL
        .iter()
        .flat_map(|v| [format!("false_{}", v.name()), format!("miss_{}", v.name())])
        .collect();
    let columns: Vec<&str> = std::iter::once("snr").chain(names.iter().map(String::as_str)).collect();
    let rows: Vec<Vec<f64>> = r
        .snr_db
        .iter()
        .filter(|&&snr| r.estimation.iter().any(|e| e.snr_db == snr))
        .map(|&snr| {
            let mut row = vec![snr];
            for &v in &Variant::ALL {
                let e = r.estimation_row(snr, v);
                row.push(e.map_or(f64::NAN, |e| e.false_rate));
                row.push(e.map_or(f64::NAN, |e| e.miss_rate));
            }
            row
        })
        .collect();
    tsv(&["proportion of falsely detected and missed paths vs receive SNR (dB)"], &columns, &rows)
}

pub fn trials_csv(r: &MonteCarloResult, variant: Variant) -> String {
    let idx = Variant::ALL.iter().position(|&v| v == variant).expect("known variant");
    let mut s = format!("{TRIAL_CSV_HEADER}\n");
    for rec in r.trials.get(idx).into_iter().flatten() {
        let _ = writeln!(s, "{}", rec.csv_row());
    }
    s
}

/// Write every table that has content (plus header-only series files) into
/// `dir`, creating it if needed. Returns the written paths.
pub fn write_all(r: &MonteCarloResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    if !r.denoising.is_empty() {
        write(dir, "denoising_gain.csv", &denoising_csv(r), &mut written)?;
    }
    if !r.clustering.is_empty() {
        write(dir, "cluster_cm.csv", &cluster_cm_csv(r), &mut written)?;
        write(dir, "cluster_mae.csv", &cluster_mae_csv(r), &mut written)?;
        write(dir, "ecm.tsv", &ecm_tsv(r), &mut written)?;
    }
    if !r.estimation.is_empty() {
        write(dir, "dmse.tsv", &dmse_tsv(r), &mut written)?;
        write(dir, "gain_nmse.tsv", &gain_nmse_tsv(r), &mut written)?;
        write(dir, "path_errors.tsv", &path_errors_tsv(r), &mut written)?;
        for v in Variant::ALL {
            write(dir, &format!("trials_{}.csv", v.name()), &trials_csv(r, v), &mut written)?;
        }
    }
    Ok(written)
}
