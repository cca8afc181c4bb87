use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Architecture;
use crate::error::{Error, Result};
use crate::mask::DropoutMask;
use crate::numerics::Rng;

const MAX_RESAMPLES: usize = 100;
/// Largest hidden-unit count for which [`enumerate_unit_masks`] runs.
pub const MAX_ENUMERATED_UNITS: usize = 10;

/// How dropout index sets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskScheme {
    /// Drop hidden units: their incoming weights, bias and outgoing weights.
    Unit,
    /// Drop individual parameter coordinates (output biases excepted).
    Coordinate,
}

impl fmt::Display for MaskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskScheme::Unit => "unit",
            MaskScheme::Coordinate => "coordinate",
        })
    }
}

impl FromStr for MaskScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(MaskScheme::Unit),
            "coordinate" => Ok(MaskScheme::Coordinate),
            other => Err(Error::Config(format!("unknown mask scheme '{other}'"))),
        }
    }
}

/// Mask that removes the hidden units flagged in `dropped[l][h]`.
pub fn unit_mask(arch: &Architecture, dropped: &[Vec<bool>]) -> Result<DropoutMask> {
    let hidden = arch.hidden_sizes();
    if dropped.len() != hidden.len() || dropped.iter().zip(hidden).any(|(d, &n)| d.len() != n) {
        return Err(Error::Shape("dropped-unit pattern does not match hidden layers".into()));
    }
    let mut mask = DropoutMask::full(arch.param_count());
    for (l, units) in dropped.iter().enumerate() {
        let into = arch.layer(l);
        let out_of = arch.layer(l + 1);
        for (h, _) in units.iter().enumerate().filter(|(_, &d)| d) {
            for i in 0..into.n_in {
                mask.set(into.weight_index(h, i), false);
            }
            mask.set(into.bias_index(h), false);
            for o in 0..out_of.n_out {
                mask.set(out_of.weight_index(o, h), false);
            }
        }
    }
    Ok(mask)
}

/// Hidden units removed by a mask, read off the unit biases.
pub fn dropped_units(arch: &Architecture, mask: &DropoutMask) -> Vec<Vec<bool>> {
    (0..arch.hidden_sizes().len())
        .map(|l| {
            let lay = arch.layer(l);
            (0..lay.n_out).map(|h| !mask.is_kept(lay.bias_index(h))).collect()
        })
        .collect()
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout rate {p} outside [0, 1)")));
    }
    Ok(())
}

fn draw_unit(arch: &Architecture, p: f64, rng: &mut Rng) -> Result<DropoutMask> {
    for _ in 0..MAX_RESAMPLES {
        let dropped: Vec<Vec<bool>> = arch
            .hidden_sizes()
            .iter()
            .map(|&n| (0..n).map(|_| p > 0.0 && rng.bernoulli(p)).collect())
            .collect();
        if dropped.iter().all(|layer| layer.iter().any(|d| !d)) {
            return unit_mask(arch, &dropped);
        }
    }
    Err(Error::DegenerateMask(MAX_RESAMPLES))
}

fn draw_coordinate(arch: &Architecture, p: f64, rng: &mut Rng) -> Result<DropoutMask> {
    let out_bias = arch.output_bias_range();
    for _ in 0..MAX_RESAMPLES {
        let kept: Vec<bool> = (0..arch.param_count())
            .map(|i| out_bias.contains(&i) || p == 0.0 || !rng.bernoulli(p))
            .collect();
        let mask = DropoutMask::from_kept(kept);
        let alive = arch
            .layers()
            .iter()
            .all(|lay| (lay.weights..lay.biases).any(|i| mask.is_kept(i)));
        if alive {
            return Ok(mask);
        }
    }
    Err(Error::DegenerateMask(MAX_RESAMPLES))
}

/// Samples `n_masks` dropout masks at rate `p`. Output biases are always
/// kept; a layer left with nothing is resampled.
pub fn sample_masks(
    arch: &Architecture,
    p: f64,
    n_masks: usize,
    rng: &mut Rng,
    scheme: MaskScheme,
) -> Result<Vec<DropoutMask>> {
    check_rate(p)?;
    (0..n_masks)
        .map(|_| match scheme {
            MaskScheme::Unit => draw_unit(arch, p, rng),
            MaskScheme::Coordinate => draw_coordinate(arch, p, rng),
        })
        .collect()
}

/// Log-probability of drawing `mask` under independent Bernoulli(p) drops.
pub fn mask_log_likelihood(arch: &Architecture, mask: &DropoutMask, p: f64, scheme: MaskScheme) -> Result<f64> {
    check_rate(p)?;
    let (dropped, total) = match scheme {
        MaskScheme::Unit => {
            let units = dropped_units(arch, mask);
            let d = units.iter().flatten().filter(|&&x| x).count();
            (d, units.iter().map(Vec::len).sum::<usize>())
        }
        MaskScheme::Coordinate => {
            let out_bias = arch.output_bias_range();
            let d = (0..mask.len()).filter(|&i| !out_bias.contains(&i) && !mask.is_kept(i)).count();
            (d, mask.len() - out_bias.len())
        }
    };
    let kept = (total - dropped) as f64;
    if dropped > 0 && p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_p = if dropped == 0 { 0.0 } else { dropped as f64 * p.ln() };
    Ok(log_p + kept * (1.0 - p).ln())
}

/// Every unit mask that leaves each hidden layer at least one unit.
pub fn enumerate_unit_masks(arch: &Architecture) -> Result<Vec<DropoutMask>> {
    let hidden = arch.hidden_sizes();
    let total: usize = hidden.iter().sum();
    if total > MAX_ENUMERATED_UNITS {
        return Err(Error::Capacity {
            what: "hidden units for mask enumeration",
            actual: total,
            limit: MAX_ENUMERATED_UNITS,
        });
    }
    let mut out = Vec::new();
    for bits in 0u32..(1 << total) {
        let mut pos = 0;
        let dropped: Vec<Vec<bool>> = hidden
            .iter()
            .map(|&n| {
                let layer = (0..n).map(|j| bits >> (pos + j) & 1 == 1).collect();
                pos += n;
                layer
            })
            .collect();
        if dropped.iter().all(|l: &Vec<bool>| l.iter().any(|d| !d)) {
            out.push(unit_mask(arch, &dropped)?);
        }
    }
    Ok(out)
}
