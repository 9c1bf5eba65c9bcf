use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::StudyConfig;
use super::experiment::mean_std;
use super::CliError;
use crate::design::uniform_point;
use crate::gp::{fit_gp, Dataset};
use crate::lipschitz::estimate_l_global;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub noise: f64,
    pub sample_size: usize,
    pub mean_l: f64,
    pub std_l: f64,
    /// Half width of the normal 95% interval of the mean.
    pub ci95_half_width: f64,
    pub values: Vec<f64>,
}

pub const STUDY_HEADER: &str = "noise,sample_size,replicates,mean_l,std_l,ci95_half_width";

/// GP-based Lipschitz estimates from uniformly random noisy samples, for every
/// noise level and sample size in the config.
pub fn run_lipschitz_study(config: &StudyConfig) -> Result<Vec<StudyRow>, CliError> {
    config.validate()?;
    let bench = config.benchmark()?;
    let mut out = Vec::new();
    for (ni, &noise) in config.noise_levels.iter().enumerate() {
        let normal = Normal::new(0.0, noise).map_err(|e| CliError::Config(e.to_string()))?;
        for (si, &n) in config.sample_sizes.iter().enumerate() {
            let mut values = Vec::with_capacity(config.replicates);
            for r in 0..config.replicates {
                let stream = config.seed.wrapping_add((ni as u64) << 40).wrapping_add((si as u64) << 20).wrapping_add(r as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let x: Vec<Vec<f64>> = (0..n).map(|_| uniform_point(bench.domain(), &mut rng)).collect();
                let y: Vec<f64> = x.iter().map(|p| bench.evaluate(p) + if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 }).collect();
                let data = Dataset::new(x, y, bench.domain().clone())?;
                let gp = fit_gp(&data, config.restarts, &mut rng)?;
                values.push(estimate_l_global(&gp, &mut rng).value);
            }
            let (mean_l, std_l) = mean_std(&values);
            out.push(StudyRow {
                noise,
                sample_size: n,
                mean_l,
                std_l,
                ci95_half_width: 1.96 * std_l / (values.len() as f64).sqrt(),
                values,
            });
        }
    }
    Ok(out)
}

pub fn write_study<W: Write>(w: &mut W, rows: &[StudyRow]) -> std::io::Result<()> {
    writeln!(w, "{STUDY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.noise, r.sample_size, r.values.len(), r.mean_l, r.std_l, r.ci95_half_width)?;
    }
    Ok(())
}
