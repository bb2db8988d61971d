//! Command-line front end: beam design and pattern evaluation, single-link
//! and Monte Carlo simulations, the two-user scenario, and uplink angle
//! probing. Angles are degrees at this boundary and in every CSV; the
//! library works in radians.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use uwbeam_core::angle::default_angle_grid;
use uwbeam_core::beam::{
    beam_pattern, design_null_steering, design_single_beam, ArrayGeometry, BeamWeights,
};
use uwbeam_core::harness::{
    emit_results, load_config, probe_angle_map, run_monte_carlo, run_single_link, run_two_user,
    ExperimentConfig, Profile, RunArtifacts, TwoUserConfig,
};

const SOUND_SPEED: f64 = 1500.0;

#[derive(Parser)]
#[command(name = "uwbeam", version, about = "Simulator for angle-steered underwater acoustic downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design frequency-domain beam weights and write them as CSV.
    DesignWeights {
        #[command(flatten)]
        beam: BeamArgs,
        /// Output CSV file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Evaluate a design's far-field response over angle and write it as CSV.
    Beampattern {
        #[command(flatten)]
        beam: BeamArgs,
        /// Evaluation frequency in Hz; defaults to the profile carrier.
        #[arg(long, value_name = "HZ")]
        frequency_hz: Option<f64>,
        /// Output CSV file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run one end-to-end link and write its traces.
    Sim {
        #[command(flatten)]
        source: ConfigSource,
        /// Override the channel noise and payload seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Sweep independent channel realizations and write the MSE distribution.
    Mc {
        #[command(flatten)]
        source: ConfigSource,
        /// Master seed; every realization seed derives from it.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Override the configured realization count.
        #[arg(long, value_name = "K")]
        realizations: Option<usize>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Serve two users at once and write per-user traces.
    TwoUser {
        #[arg(long, default_value_t = 21)]
        seed: u64,
        /// Transmit signal-to-interference ratio in dB.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        sir_db: f64,
        /// Per-user receiver SNR in dB.
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        snr_db: f64,
        /// Plain steered beams instead of a null toward the other user.
        #[arg(long)]
        plain: bool,
        /// Frame length in symbols, training included.
        #[arg(long, value_name = "SYMBOLS")]
        n_d: Option<usize>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Probe the channel uplink and write the delay-angle power map.
    AngleMap {
        #[command(flatten)]
        source: ConfigSource,
        /// Override the channel noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Space,
    Mace,
}

impl ProfileArg {
    fn profile(self) -> Profile {
        match self {
            Self::Space => Profile::Space,
            Self::Mace => Profile::Mace,
        }
    }

    fn config(self) -> ExperimentConfig {
        match self {
            Self::Space => ExperimentConfig::space(),
            Self::Mace => ExperimentConfig::mace(),
        }
    }
}

#[derive(Args)]
struct ConfigSource {
    /// Experiment description in JSON; field names mirror the library's
    /// `ExperimentConfig` and unknown keys are rejected.
    #[arg(long, value_name = "FILE", conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Built-in defaults used when no config file is given.
    #[arg(long, value_enum, default_value_t = ProfileArg::Space)]
    profile: ProfileArg,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => {
                load_config(path).with_context(|| format!("loading {}", path.display()))
            }
            None => Ok(self.profile.config()),
        }
    }
}

#[derive(Args)]
struct BeamArgs {
    /// Array geometry and sample rates to design for.
    #[arg(long, value_enum, default_value_t = ProfileArg::Space)]
    profile: ProfileArg,
    /// Steering angle in degrees, broadside = 0.
    #[arg(long, value_name = "DEG", allow_negative_numbers = true)]
    angle_deg: f64,
    /// Null direction in degrees; repeat the flag for several nulls.
    #[arg(long, value_name = "DEG", allow_negative_numbers = true)]
    null_deg: Vec<f64>,
    /// Transform length in DFT bins.
    #[arg(long, default_value_t = 4096)]
    l: usize,
    /// Pulse roll-off defining the occupied band.
    #[arg(long, default_value_t = 0.25)]
    alpha_rc: f64,
}

impl BeamArgs {
    fn design(&self) -> Result<(ArrayGeometry, BeamWeights)> {
        let p = self.profile.profile().params()?;
        let geometry = ArrayGeometry::new(p.elements, p.spacing, SOUND_SPEED)?;
        let angle = self.angle_deg.to_radians();
        let w = if self.null_deg.is_empty() {
            design_single_beam(
                &geometry,
                angle,
                p.fc,
                p.fs,
                self.l,
                p.samples_per_symbol,
                self.alpha_rc,
            )?
        } else {
            let nulls: Vec<f64> = self.null_deg.iter().map(|d| d.to_radians()).collect();
            design_null_steering(
                &geometry,
                angle,
                &nulls,
                p.fc,
                p.fs,
                self.l,
                p.samples_per_symbol,
                self.alpha_rc,
            )?
        };
        Ok((geometry, w))
    }
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn cmd_design_weights(beam: &BeamArgs, out: &Path) -> Result<()> {
    let (_, w) = beam.design()?;
    // off-band bins are structurally zero, so only in-band rows are written
    let mut s = String::from("bin,frequency_hz,element,re,im\n");
    for &bin in &w.band_bins {
        for (el, v) in w.weights[bin].iter().enumerate() {
            let _ = writeln!(s, "{bin},{},{el},{},{}", w.bin_frequency(bin), v.re, v.im);
        }
    }
    write_text(out, &s)?;
    println!(
        "wrote {} in-band bins x {} elements to {}",
        w.band_bins.len(),
        w.elements(),
        out.display()
    );
    Ok(())
}

fn cmd_beampattern(beam: &BeamArgs, frequency_hz: Option<f64>, out: &Path) -> Result<()> {
    let (geometry, w) = beam.design()?;
    let f = frequency_hz.unwrap_or(w.fc);
    let grid = default_angle_grid();
    let response = beam_pattern(&w, &geometry, &grid, f)?;
    let peak = response.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut s = String::from("angle_deg,amplitude,gain_db\n");
    for (theta, amp) in grid.iter().zip(&response) {
        let db = if *amp > 0.0 && peak > 0.0 { 20.0 * (amp / peak).log10() } else { -300.0 };
        let _ = writeln!(s, "{},{amp},{db}", theta.to_degrees());
    }
    write_text(out, &s)?;
    println!("wrote {} pattern points at {f} Hz to {}", grid.len(), out.display());
    Ok(())
}

fn cmd_sim(source: &ConfigSource, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config = source.load()?;
    if let Some(seed) = seed {
        config.channel.seed = seed;
    }
    let run = run_single_link(&config)?;
    let artifacts = RunArtifacts {
        config: Some(&config),
        master_seed: config.channel.seed,
        single: Some(&run),
        map: run.map.as_ref(),
        ..Default::default()
    };
    let written = emit_results(&artifacts, out)?;
    println!(
        "mse {:.2} dB, {} bit errors over {} symbols, converged: {}",
        run.metrics.mse_db, run.metrics.bit_errors, run.metrics.symbols, run.metrics.converged
    );
    report_written(&written);
    Ok(())
}

fn cmd_mc(
    source: &ConfigSource,
    seed: u64,
    realizations: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut config = source.load()?;
    if let Some(k) = realizations {
        config.protocol.realizations = k;
    }
    let mc = run_monte_carlo(&config, seed)?;
    let artifacts = RunArtifacts {
        config: Some(&config),
        master_seed: seed,
        mc: Some(&mc),
        ..Default::default()
    };
    let written = emit_results(&artifacts, out)?;
    let median = mc.cdf[mc.cdf.len() / 2].mse_db;
    println!(
        "{} realizations: median mse {median:.2} dB, aggregate ber {:.3e}",
        mc.metrics.len(),
        mc.aggregate_ber
    );
    report_written(&written);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_two_user(
    seed: u64,
    sir_db: f64,
    snr_db: f64,
    plain: bool,
    n_d: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut config = TwoUserConfig::default();
    config.seed = seed;
    config.sir_db = sir_db;
    config.snr_db = snr_db;
    config.use_nulls = !plain;
    if let Some(n) = n_d {
        config.n_d = n;
    }
    let run = run_two_user(&config)?;
    let artifacts = RunArtifacts { two_user: Some(&run), ..Default::default() };
    let written = emit_results(&artifacts, out)?;
    for (u, user) in run.users.iter().enumerate() {
        println!(
            "user {}: mse {:.2} dB, {} bit errors, pll slope {:+.3} rad/s, converged: {}",
            u + 1,
            user.metrics.mse_db,
            user.metrics.bit_errors,
            user.pll_slope,
            user.metrics.converged
        );
    }
    report_written(&written);
    Ok(())
}

fn cmd_angle_map(source: &ConfigSource, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config = source.load()?;
    if let Some(seed) = seed {
        config.channel.seed = seed;
    }
    let (theta, map) = probe_angle_map(&config)?;
    let artifacts = RunArtifacts {
        config: Some(&config),
        master_seed: config.channel.seed,
        map: Some(&map),
        ..Default::default()
    };
    let written = emit_results(&artifacts, out)?;
    println!("estimated angle {:.2} deg", theta.to_degrees());
    report_written(&written);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::DesignWeights { beam, out } => cmd_design_weights(beam, out),
        Command::Beampattern { beam, frequency_hz, out } => {
            cmd_beampattern(beam, *frequency_hz, out)
        }
        Command::Sim { source, seed, out } => cmd_sim(source, *seed, out),
        Command::Mc { source, seed, realizations, out } => {
            cmd_mc(source, *seed, *realizations, out)
        }
        Command::TwoUser { seed, sir_db, snr_db, plain, n_d, out } => {
            cmd_two_user(*seed, *sir_db, *snr_db, *plain, *n_d, out)
        }
        Command::AngleMap { source, seed, out } => cmd_angle_map(source, *seed, out),
    }
}
