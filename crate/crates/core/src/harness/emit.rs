//! Result files: CSVs for external plotting and a manifest that makes every
//! run reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angle::DelayAngleMap;
use crate::error::{Error, Result};
use crate::harness::link::SingleLinkRun;
use crate::harness::monte_carlo::MonteCarloResult;
use crate::harness::two_user::TwoUserRun;
use crate::harness::ExperimentConfig;
use crate::receiver::DfeRun;

/// Bumped whenever the emitted file layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

/// Everything needed to re-run an experiment bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub artifact_version: u32,
    pub master_seed: u64,
    pub config: ExperimentConfig,
}

/// Bundle of results to write; absent parts are skipped.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunArtifacts<'a> {
    pub config: Option<&'a ExperimentConfig>,
    pub master_seed: u64,
    pub mc: Option<&'a MonteCarloResult>,
    pub single: Option<&'a SingleLinkRun>,
    pub two_user: Option<&'a TwoUserRun>,
    pub map: Option<&'a DelayAngleMap>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

fn pll_trace_csv(dfe: &DfeRun) -> String {
    let mut s = String::from("n,d_hat_re,d_hat_im,d_tilde_re,d_tilde_im,e_abs,phi_hat\n");
    for n in 0..dfe.soft.len() {
        let _ = writeln!(
            s,
            "{n},{},{},{},{},{},{}",
            dfe.soft[n].re,
            dfe.soft[n].im,
            dfe.decisions[n].re,
            dfe.decisions[n].im,
            dfe.errors[n].norm(),
            dfe.phase[n],
        );
    }
    s
}

fn constellation_csv(dfe: &DfeRun) -> String {
    let mut s = String::from("n,re,im\n");
    for (n, v) in dfe.soft.iter().enumerate().skip(dfe.training_len) {
        let _ = writeln!(s, "{n},{},{}", v.re, v.im);
    }
    s
}

/// Angle map as `(delay_s, angle_deg, power_db)` rows.
pub fn angle_map_csv(map: &DelayAngleMap) -> String {
    let mut s = String::from("delay_s,angle_deg,power_db\n");
    for (d, row) in map.power.iter().enumerate() {
        for (a, &p) in row.iter().enumerate() {
            let _ = writeln!(s, "{},{},{p}", map.delay_axis[d], map.angle_axis[a].to_degrees());
        }
    }
    s
}

/// Writes available results into `dir` and returns the created paths.
///
/// Produces `manifest.json` when a config is present, `mse_cdf.csv` and
/// `metrics.csv` for Monte Carlo results, `constellation.csv` and
/// `pll_trace.csv` for a single link (per-user variants for the two-user
/// run), and `angle_map.csv` for a delay-angle map. Numbers use Rust's
/// shortest round-trip float formatting, so identical results produce
/// identical bytes.
pub fn emit_results(artifacts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("creating {}: {e}", dir.display())))?;
    let mut written = Vec::new();

    if let Some(config) = artifacts.config {
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION,
            master_seed: artifacts.master_seed,
            config: config.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("serializing manifest: {e}")))?;
        written.push(write_file(dir, "manifest.json", &text)?);
    }

    if let Some(mc) = artifacts.mc {
        let mut cdf = String::from("mse_db,cdf\n");
        for p in &mc.cdf {
            let _ = writeln!(cdf, "{},{}", p.mse_db, p.probability);
        }
        written.push(write_file(dir, "mse_cdf.csv", &cdf)?);

        let mut metrics = String::from("realization,mse_db,bit_errors,converged\n");
        for (i, m) in mc.metrics.iter().enumerate() {
            let _ = writeln!(metrics, "{i},{},{},{}", m.mse_db, m.bit_errors, m.converged);
        }
        written.push(write_file(dir, "metrics.csv", &metrics)?);
    }

    if let Some(run) = artifacts.single {
        written.push(write_file(dir, "constellation.csv", &constellation_csv(&run.dfe))?);
        written.push(write_file(dir, "pll_trace.csv", &pll_trace_csv(&run.dfe))?);
        if artifacts.mc.is_none() {
            let mut metrics = String::from("realization,mse_db,bit_errors,converged\n");
            for (i, m) in run.frame_metrics.iter().enumerate() {
                let _ = writeln!(metrics, "{i},{},{},{}", m.mse_db, m.bit_errors, m.converged);
            }
            written.push(write_file(dir, "metrics.csv", &metrics)?);
        }
    }

    if let Some(run) = artifacts.two_user {
        for (u, user) in run.users.iter().enumerate() {
            let tag = u + 1;
            written.push(write_file(
                dir,
                &format!("constellation_user{tag}.csv"),
                &constellation_csv(&user.dfe),
            )?);
            written.push(write_file(
                dir,
                &format!("pll_trace_user{tag}.csv"),
                &pll_trace_csv(&user.dfe),
            )?);
        }
        let mut metrics = String::from("user,mse_db,bit_errors,converged\n");
        for (u, user) in run.users.iter().enumerate() {
            let m = &user.metrics;
            let _ = writeln!(metrics, "{},{},{},{}", u + 1, m.mse_db, m.bit_errors, m.converged);
        }
        written.push(write_file(dir, "two_user_metrics.csv", &metrics)?);
    }

    if let Some(map) = artifacts.map {
        written.push(write_file(dir, "angle_map.csv", &angle_map_csv(map))?);
    }

    Ok(written)
}

/// Reads an experiment config from a JSON file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("parsing {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Reads a run manifest, returning the config and master seed it captured.
pub fn load_manifest(path: &Path) -> Result<(ExperimentConfig, u64)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("parsing {}: {e}", path.display())))?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        return Err(Error::Config(format!(
            "manifest version {} is not the supported {ARTIFACT_VERSION}",
            manifest.artifact_version
        )));
    }
    manifest.config.validate()?;
    Ok((manifest.config, manifest.master_seed))
}
